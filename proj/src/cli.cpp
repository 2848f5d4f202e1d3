#include "immtsf/cli.hpp"

#include "immtsf/experiment.hpp"
#include "immtsf/io.hpp"
#include "immtsf/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace immtsf {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Options {
  std::string manifest;
  std::string dataset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string unit;
  int bins = kDefaultTemporalBins;
  bool csv = false;
  std::string variant_ttf;
  std::string variant_mmf;
  std::optional<double> sigma;
  std::optional<double> kappa;
  std::optional<int> max_epochs;
  std::string checkpoint;
  bool table = false;

  std::string kind = "text-informative";
  SynthSpec synth;
};

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw Error(ErrorKind::Input, "cannot write '" + o.out + "'");
  f << text;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

io::DatasetManifest select_manifest(const Options& o) {
  if (o.manifest.empty()) throw Error(ErrorKind::Input, "--manifest is required");
  auto all = io::load_manifest(o.manifest);
  if (all.empty()) throw Error(ErrorKind::Input, "manifest lists no datasets");
  if (o.dataset.empty()) return all.front();
  for (auto& m : all)
    if (m.name == o.dataset) return m;
  throw Error(ErrorKind::Input, "manifest has no dataset named '" + o.dataset + "'");
}

// --seed, then IMMTSF_SEED, then the manifest.
std::uint64_t resolve_seed(const Options& o, const io::DatasetManifest& m) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("IMMTSF_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw Error(ErrorKind::Input, std::string("IMMTSF_SEED is not an integer: ") + env);
    return v;
  }
  return m.seed.value_or(0);
}

TrainConfig train_config(const Options& o, const io::DatasetManifest& m) {
  TrainConfig tc = m.train;
  tc.seed = resolve_seed(o, m);
  if (o.max_epochs) tc.max_epochs = *o.max_epochs;
  return tc;
}

PipelineConfig apply_settings(PipelineConfig cfg, const Options& o, const io::ModelSettings& s) {
  cfg.sigma = o.sigma.value_or(s.sigma);
  cfg.kappa = o.kappa.value_or(s.kappa);
  cfg.time_dim = s.time_dim;
  cfg.hidden = s.hidden;
  cfg.heads = s.heads;
  return cfg;
}

struct Prepared {
  io::DatasetManifest manifest;
  ExperimentData data;
};

Prepared load_experiment(const Options& o, std::ostream& err) {
  Prepared p{select_manifest(o), {}};
  auto loaded = io::load_dataset(p.manifest);
  print_warnings(loaded.warnings, err);
  p.data = prepare_experiment(loaded.dataset);
  print_warnings(p.data.warnings, err);
  return p;
}

RunSummary summarize(const std::string& dataset, std::uint64_t seed, const VariantOutcome& v) {
  RunSummary s;
  s.dataset = dataset;
  s.variant = v.config.variant_name();
  s.seed = seed;
  s.epochs_run = v.training.epochs_run;
  s.best_val_mse = v.training.best_val_mse;
  s.test_mse = v.test_mse;
  return s;
}

ordered_json summary_json(const RunSummary& s) { return ordered_json::parse(to_json(s, -1)); }

// ---------------------------------------------------------------------------------------------

int cmd_profile(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw Error(ErrorKind::Input, "--manifest is required");
  std::vector<IrregularityProfile> rows;
  for (const auto& m : io::load_manifest(o.manifest)) {
    if (!o.dataset.empty() && m.name != o.dataset) continue;
    auto loaded = io::load_dataset(m);
    print_warnings(loaded.warnings, err);
    const TimeUnit unit = o.unit.empty() ? m.unit : parse_time_unit(o.unit);
    auto result = profile_dataset(m.name, loaded.dataset.entities, unit, o.bins);
    print_warnings(result.warnings, err);
    rows.push_back(result.profile);
  }
  if (rows.empty()) throw Error(ErrorKind::Input, "no dataset selected");

  std::ostringstream csv;
  csv << kProfileCsvHeader << '\n';
  for (const auto& r : rows) csv << profile_csv_row(r) << '\n';
  if (!o.out.empty()) {
    emit(o, out, csv.str());
  } else {
    out << (o.csv ? csv.str() : profile_table(rows));
  }
  return 0;
}

int cmd_prealign(const Options& o, std::ostream& out, std::ostream& err) {
  const auto m = select_manifest(o);
  auto loaded = io::load_dataset(m);
  print_warnings(loaded.warnings, err);
  std::vector<ForecastWindow> windows;
  for (const auto& e : loaded.dataset.entities) {
    auto w = extract_windows(e.series, e.text, m.window);
    std::move(w.begin(), w.end(), std::back_inserter(windows));
  }
  if (windows.empty()) throw Error(ErrorKind::EmptyData, "dataset '" + m.name + "' yields no windows");
  const std::size_t L = compute_global_resolution(windows);
  std::ostringstream os;
  for (const auto& w : windows) {
    ordered_json line;
    line["entity_id"] = w.entity_id;
    line["t_start"] = w.t_start;
    line["t_cut"] = w.t_cut;
    line["t_end"] = w.t_end;
    const auto aligned = ordered_json::parse(to_jsonl(align(w, L)));
    for (const auto& [k, v] : aligned.items()) line[k] = v;
    os << line.dump() << '\n';
  }
  emit(o, out, os.str());
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  auto [m, data] = load_experiment(o, err);
  const TtfVariant ttf = o.variant_ttf.empty() ? m.model.ttf : parse_ttf_variant(o.variant_ttf);
  const MmfVariant mmf = o.variant_mmf.empty() ? m.model.mmf : parse_mmf_variant(o.variant_mmf);
  const auto cfg = apply_settings(make_config(data, ttf, mmf), o, m.model);
  const auto tc = train_config(o, m);
  const auto outcome = run_variant(data, cfg, tc);

  if (!o.out.empty()) {
    Pipeline pipeline{outcome.config, outcome.training.params, data.normalization};
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error(ErrorKind::Input, "cannot write '" + o.out + "'");
    f << io::checkpoint_to_json(pipeline, {m.name, tc.seed, outcome.training.epochs_run, outcome.training.best_val_mse})
      << '\n';
  }
  out << to_json(summarize(m.name, tc.seed, outcome)) << '\n';
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.checkpoint.empty()) throw Error(ErrorKind::Input, "--checkpoint is required");
  auto [pipeline, meta] = io::checkpoint_from_json(io::read_file(o.checkpoint));
  auto [m, data] = load_experiment(o, err);
  if (data.n_vars != static_cast<std::size_t>(pipeline.config.n_vars))
    throw Error(ErrorKind::Shape, "checkpoint and dataset disagree on the number of variables");

  std::vector<PreparedWindow> test;
  for (const auto& w : data.test_windows)
    test.push_back(prepare_window(w, static_cast<std::size_t>(pipeline.config.length), pipeline.normalization));
  RunSummary s;
  s.dataset = m.name;
  s.variant = pipeline.config.variant_name();
  s.seed = meta.seed;
  s.epochs_run = meta.epochs_run;
  s.best_val_mse = meta.best_val_mse;
  s.test_mse = evaluate_mse(pipeline.config, pipeline.params, test);
  emit(o, out, to_json(s) + "\n");
  return 0;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  auto [m, data] = load_experiment(o, err);
  std::vector<TtfVariant> ttfs{TtfVariant::RecAvg, TtfVariant::T2vXattn};
  std::vector<MmfVariant> mmfs{MmfVariant::GrAdd, MmfVariant::XattnAdd};
  if (!o.variant_ttf.empty()) ttfs = {parse_ttf_variant(o.variant_ttf)};
  else if (m.model.ttf_set) ttfs = {m.model.ttf};
  if (!o.variant_mmf.empty()) mmfs = {parse_mmf_variant(o.variant_mmf)};
  else if (m.model.mmf_set) mmfs = {m.model.mmf};
  if (mmfs.size() == 1 && mmfs.front() == MmfVariant::None)
    throw Error(ErrorKind::Input, "compare needs a multimodal fusion variant");

  std::vector<PipelineConfig> candidates;
  for (auto t : ttfs)
    for (auto f : mmfs) candidates.push_back(apply_settings(make_config(data, t, f), o, m.model));
  const auto tc = train_config(o, m);
  const auto cmp = compare_variants(data, candidates, tc);

  const double base = cmp.unimodal.test_mse;
  auto selected = summarize(m.name, tc.seed, cmp.candidates[cmp.selected]);
  selected.test_mse_unimodal = base;
  selected.relative_improvement_pct = cmp.relative_improvement_pct();

  if (o.table) {
    std::ostringstream os;
    os << std::left << std::fixed << std::setprecision(6) << std::setw(20) << "variant" << std::setw(14) << "val_mse" << std::setw(14) << "test_mse"
       << "improvement_pct\n";
    auto row = [&](const VariantOutcome& v) {
      os << std::setw(20) << v.config.variant_name() << std::setw(14) << v.training.best_val_mse << std::setw(14)
         << v.test_mse << 100.0 * (base - v.test_mse) / base << '\n';
    };
    row(cmp.unimodal);
    for (const auto& c : cmp.candidates) row(c);
    os << "selected: " << selected.variant << '\n';
    emit(o, out, os.str());
    return 0;
  }

  ordered_json j = summary_json(selected);
  j["unimodal"] = summary_json(summarize(m.name, tc.seed, cmp.unimodal));
  j["candidates"] = ordered_json::array();
  for (const auto& c : cmp.candidates) {
    auto s = summarize(m.name, tc.seed, c);
    s.test_mse_unimodal = base;
    s.relative_improvement_pct = 100.0 * (base - c.test_mse) / base;
    j["candidates"].push_back(summary_json(s));
  }
  emit(o, out, j.dump(2) + "\n");
  return 0;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
  if (o.out.empty()) throw Error(ErrorKind::Input, "--out directory is required");
  SynthSpec spec = o.synth;
  spec.kind = parse_synth_kind(o.kind);
  if (o.seed) spec.seed = *o.seed;
  const auto data = generate_synth(spec);
  write_synth(o.out, spec, data);
  std::size_t n_obs = 0, n_text = 0;
  for (const auto& s : data.series) n_obs += s.num_observations();
  for (const auto& t : data.text) n_text += t.records.size();
  out << "wrote " << to_string(spec.kind) << " dataset to " << o.out << ": " << data.series.size() << " entities, "
      << n_obs << " observations, " << n_text << " text records\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Irregular multimodal time-series forecasting toolkit", "immtsf"};
  app.require_subcommand(1);
  Options o;

  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest (JSON)");
    sub->add_option("--dataset", o.dataset, "Dataset name when the manifest lists several");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed (overrides IMMTSF_SEED and the manifest)");
    sub->add_option("--variant-ttf", o.variant_ttf, "recavg | t2v-xattn");
    sub->add_option("--variant-mmf", o.variant_mmf, "gr-add | xattn-add | none");
    sub->add_option("--sigma", o.sigma, "RecAvg temperature");
    sub->add_option("--kappa", o.kappa, "XAttn-Add residual weight");
    sub->add_option("--max-epochs", o.max_epochs, "Upper bound on training epochs");
  };

  auto* profile = app.add_subcommand("profile", "Irregularity metrics per dataset");
  add_manifest(profile);
  profile->add_option("--unit", o.unit, "IOI unit: seconds, minutes, hours, days, weeks");
  profile->add_option("--bins", o.bins, "Temporal entropy bins")->check(CLI::PositiveNumber);
  profile->add_flag("--csv", o.csv, "Print CSV instead of a table");
  profile->add_option("--out", o.out, "Write CSV to this file");

  auto* prealign = app.add_subcommand("prealign", "Aligned windows as JSON Lines");
  add_manifest(prealign);
  prealign->add_option("--out", o.out, "Output file");

  auto* train = app.add_subcommand("train", "Train one pipeline and report its run summary");
  add_manifest(train);
  add_model(train);
  train->add_option("--out", o.out, "Checkpoint file");

  auto* evaluate = app.add_subcommand("evaluate", "Test MSE of a saved checkpoint");
  add_manifest(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint written by train");
  evaluate->add_option("--out", o.out, "Output file");

  auto* compare = app.add_subcommand("compare", "Unimodal reference against fusion variants");
  add_manifest(compare);
  add_model(compare);
  compare->add_flag("--table", o.table, "Print a text table instead of JSON");
  compare->add_option("--out", o.out, "Output file");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--kind", o.kind, "uniform | bursty | text-informative");
  synth->add_option("--out", o.out, "Output directory");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--entities", o.synth.n_entities, "Number of entities");
  synth->add_option("--variables", o.synth.n_variables, "Variables per entity");
  synth->add_option("--noise-std", o.synth.noise_std, "Text noise standard deviation");
  synth->add_option("--dim", o.synth.dim, "Embedding dimension");
  synth->add_option("--periods", o.synth.periods, "Horizons per entity (text-informative)");
  synth->add_option("--observations", o.synth.observations_per_entity, "Observations per entity (uniform, bursty)");
  synth->add_option("--context", o.synth.context, "Context duration in seconds");
  synth->add_option("--horizon", o.synth.horizon, "Horizon duration in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*profile) return cmd_profile(o, out, err);
    if (*prealign) return cmd_prealign(o, out, err);
    if (*train) return cmd_train(o, out, err);
    if (*evaluate) return cmd_evaluate(o, out, err);
    if (*compare) return cmd_compare(o, out, err);
    if (*synth) return cmd_synth(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_input_error() ? 1 : 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace immtsf
