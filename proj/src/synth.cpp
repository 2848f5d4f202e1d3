#include "immtsf/synth.hpp"

#include "immtsf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>

namespace immtsf {

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Uniform: return "uniform";
    case SynthKind::Bursty: return "bursty";
    case SynthKind::TextInformative: return "text-informative";
  }
  return "uniform";
}

SynthKind parse_synth_kind(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "uniform") return SynthKind::Uniform;
  if (s == "bursty") return SynthKind::Bursty;
  if (s == "text-informative") return SynthKind::TextInformative;
  throw Error(ErrorKind::Input, "unknown synthetic kind '" + name + "'");
}

void SynthSpec::validate() const {
  if (n_entities == 0 || n_variables == 0 || dim == 0) throw Error(ErrorKind::Input, "synthetic counts must be positive");
  if (!(context > 0.0) || !(horizon > 0.0)) throw Error(ErrorKind::Input, "synthetic durations must be positive");
  if (!(noise_std >= 0.0)) throw Error(ErrorKind::Input, "noise_std must be non-negative");
  if (kind == SynthKind::TextInformative && periods < 2) throw Error(ErrorKind::Input, "text-informative needs at least 2 periods");
  if (kind != SynthKind::TextInformative && observations_per_entity < 2)
    throw Error(ErrorKind::Input, "at least 2 observations per entity are required");
}

namespace {

constexpr double kLevelPhi = 0.5;
constexpr double kObservationNoise = 0.05;

std::string variable_name(std::size_t n) { return "v" + std::to_string(n); }
std::string entity_name(std::size_t e) { return "e" + std::to_string(e); }

struct Ar1 {
  double state;
  double step(std::mt19937_64& rng, std::normal_distribution<double>& g) {
    state = kLevelPhi * state + std::sqrt(1.0 - kLevelPhi * kLevelPhi) * g(rng);
    return state;
  }
};

std::vector<double> random_embedding(std::size_t dim, std::mt19937_64& rng, std::normal_distribution<double>& g) {
  std::vector<double> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

void fill_values(Variable& v, std::mt19937_64& rng, std::normal_distribution<double>& g) {
  Ar1 level{g(rng)};
  for (auto& o : v.observations) o.value = level.step(rng, g) + kObservationNoise * g(rng);
}

// One uninformative text record per horizon, at a uniformly random time.
TextStream background_text(const std::string& id, double first, double last, double period, std::size_t dim,
                           std::mt19937_64& rng, std::normal_distribution<double>& g) {
  TextStream s{id, {}};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double start = first; start < last; start += period) {
    const double t = start + u(rng) * period;
    if (t <= last) s.records.push_back({t, random_embedding(dim, rng, g)});
  }
  return s;
}

std::vector<double> uniform_times(const SynthSpec& spec, std::mt19937_64& rng) {
  const double step = spec.horizon / 8.0;
  std::bernoulli_distribution keep(0.7);
  std::vector<double> t{kSynthEpoch};
  for (std::size_t i = 1; t.size() < spec.observations_per_entity; ++i)
    if (keep(rng)) t.push_back(kSynthEpoch + static_cast<double>(i) * step);
  return t;
}

std::vector<double> bursty_times(const SynthSpec& spec, std::mt19937_64& rng) {
  const double quiet_gap = spec.horizon / 8.0;
  const double burst_gap = quiet_gap / 10.0;
  std::exponential_distribution<double> quiet_dwell(1.0 / (20.0 * quiet_gap));
  std::exponential_distribution<double> burst_dwell(1.0 / (5.0 * quiet_gap));
  std::vector<double> t{kSynthEpoch};
  bool burst = false;
  double state_end = kSynthEpoch + quiet_dwell(rng);
  while (t.size() < spec.observations_per_entity) {
    const double next = t.back() + (burst ? burst_gap : quiet_gap);
    if (next > state_end) {
      burst = !burst;
      state_end += burst ? burst_dwell(rng) : quiet_dwell(rng);
      if (!burst) continue;
    }
    t.push_back(next);
  }
  return t;
}

void generate_text_informative(const SynthSpec& spec, std::mt19937_64& rng, SynthDataset& out) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.05, 0.65);
  std::bernoulli_distribution keep(0.6);
  std::uniform_int_distribution<int> forced_slot(0, 7);
  const double P = spec.horizon;
  out.truth.scale = std::sqrt(1.0 + kObservationNoise * kObservationNoise);

  for (std::size_t e = 0; e < spec.n_entities; ++e) {
    IrregularSeries s{entity_name(e), {}};
    for (std::size_t n = 0; n < spec.n_variables; ++n) {
      Variable v{variable_name(n), {}};
      Ar1 level{g(rng)};
      for (std::size_t p = 0; p < spec.periods; ++p) {
        const double lv = level.step(rng, g);
        const double base = kSynthEpoch + static_cast<double>(p) * P;
        const int forced = forced_slot(rng);
        for (int i = 0; i < 8; ++i) {
          const double u = jitter(rng);
          const bool kept = keep(rng);
          const bool anchor = p == 0 && i == 0 && n == 0;
          if (!kept && i != forced && !anchor) continue;
          const double t = anchor ? base : base + (i + u) * P / 8.0;
          v.observations.push_back({t, lv + kObservationNoise * g(rng)});
        }
      }
      s.variables.push_back(std::move(v));
    }

    const auto& v0 = s.variables.front().observations;
    TextStream text{s.entity_id, {}};
    std::vector<SynthTruth::Link> links;
    for (std::size_t p = 0; p + 1 < spec.periods; ++p) {
      const double tau = kSynthEpoch + (static_cast<double>(p) + 0.96) * P;
      const auto next = std::upper_bound(v0.begin(), v0.end(), tau,
                                         [](double t, const Observation& o) { return t < o.timestamp; });
      std::vector<double> emb = random_embedding(spec.dim, rng, g);
      emb[0] = next->value / out.truth.scale + spec.noise_std * g(rng);
      text.records.push_back({tau, std::move(emb)});
      links.push_back({tau, next->timestamp, next->value});
    }
    s.validate();
    text.validate();
    out.series.push_back(std::move(s));
    out.text.push_back(std::move(text));
    out.truth.links.push_back(std::move(links));
  }
}

}  // namespace

SynthDataset generate_synth(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SynthDataset out;
  if (spec.kind == SynthKind::TextInformative) {
    generate_text_informative(spec, rng, out);
    return out;
  }

  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t e = 0; e < spec.n_entities; ++e) {
    IrregularSeries s{entity_name(e), {}};
    double first = kSynthEpoch, last = kSynthEpoch;
    for (std::size_t n = 0; n < spec.n_variables; ++n) {
      const auto times = spec.kind == SynthKind::Uniform ? uniform_times(spec, rng) : bursty_times(spec, rng);
      Variable v{variable_name(n), {}};
      for (double t : times) v.observations.push_back({t, 0.0});
      fill_values(v, rng, g);
      last = std::max(last, times.back());
      s.variables.push_back(std::move(v));
    }
    s.validate();
    out.text.push_back(background_text(s.entity_id, first, last, spec.horizon, spec.dim, rng, g));
    out.series.push_back(std::move(s));
    out.truth.links.emplace_back();
  }
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthDataset& data) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorKind::Input, "cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("numeric.csv");
    io::write_numeric(f, data.series);
  }
  {
    auto f = open("text.jsonl");
    io::write_text(f, data.text);
  }
  {
    nlohmann::ordered_json m;
    m["name"] = std::string("synth-") + to_string(spec.kind);
    m["numeric_glob"] = "numeric.csv";
    m["text_glob"] = "text.jsonl";
    m["unit"] = "hours";
    m["context"] = spec.context;
    m["horizon"] = spec.horizon;
    m["embedding_dim"] = spec.dim;
    m["seed"] = spec.seed;
    auto f = open("manifest.json");
    f << m.dump(2) << '\n';
  }
  {
    nlohmann::ordered_json t;
    t["kind"] = to_string(spec.kind);
    t["seed"] = spec.seed;
    t["noise_std"] = spec.noise_std;
    t["scale"] = data.truth.scale;
    t["links"] = nlohmann::ordered_json::object();
    for (std::size_t e = 0; e < data.series.size(); ++e) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& l : data.truth.links[e]) arr.push_back({{"tau", l.tau}, {"next_time", l.next_time}, {"next_value", l.next_value}});
      t["links"][data.series[e].entity_id] = arr;
    }
    auto f = open("truth.json");
    f << t.dump(2) << '\n';
  }
}

}  // namespace immtsf
