#include "immtsf/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace immtsf {

double evaluate_mse(const PipelineConfig& cfg, const PipelineParams<double>& params,
                    const std::vector<PreparedWindow>& windows) {
  double sse = 0.0, count = 0.0;
  for (const auto& w : windows) {
    sse += squared_error<double>(pipeline_forward<double>(cfg, params, w), w, nullptr);
    count += w.valid.sum();
  }
  if (count <= 0.0) throw Error(ErrorKind::UndefinedMetric, "no valid targets to evaluate");
  return sse / count;
}

TrainResult train(const PipelineConfig& cfg, PipelineParams<double> params, const std::vector<PreparedWindow>& train_set,
                  const std::vector<PreparedWindow>& val_set, const TrainConfig& tc) {
  if (train_set.empty() || val_set.empty())
    throw Error(ErrorKind::Input, "training needs non-empty train and validation splits");
  if (tc.batch_size == 0) throw Error(ErrorKind::Input, "batch size must be positive");

  nn::AdamState<PipelineParams<double>> adam(params, {tc.learning_rate});
  std::mt19937_64 shuffle_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.params = params;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  int since_best = 0;
  PipelineCache<double> cache;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0, batch = 0; start < order.size(); start += tc.batch_size, ++batch) {
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      double count = 0.0;
      for (std::size_t i = start; i < stop; ++i) count += train_set[order[i]].valid.sum();
      if (count <= 0.0) continue;

      auto grads = nn::zeros_like(params);
      double loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& w = train_set[order[i]];
        const MatrixXd pred = pipeline_forward<double>(cfg, params, w, &cache);
        MatrixXd d_pred;
        loss += squared_error<double>(pred, w, &d_pred);
        pipeline_backward<double>(cfg, params, w, cache, MatrixXd(d_pred / count), grads);
      }
      loss /= count;
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
      if (!std::isfinite(loss)) throw Error(ErrorKind::Divergence, "non-finite loss at " + where);
      try {
        nn::adam_step(params, grads, adam);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Divergence) throw Error(ErrorKind::Divergence, std::string(e.what()) + " at " + where);
        throw;
      }
    }

    EpochRecord rec{epoch, evaluate_mse(cfg, params, train_set), evaluate_mse(cfg, params, val_set)};
    result.history.push_back(rec);
    result.epochs_run = epoch;
    if (!std::isfinite(rec.train_mse)) throw Error(ErrorKind::Divergence, "non-finite training MSE after epoch " + std::to_string(epoch));
    if (rec.val_mse < result.best_val_mse) {
      result.best_val_mse = rec.val_mse;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  return result;
}

namespace {

std::size_t dataset_text_dim(const Dataset& dataset) {
  if (dataset.text_dim > 0) return dataset.text_dim;
  for (const auto& e : dataset.entities)
    if (e.text.dimension() > 0) return e.text.dimension();
  return 0;
}

}  // namespace

ExperimentData prepare_experiment(const Dataset& dataset) {
  if (dataset.entities.empty()) throw Error(ErrorKind::EmptyData, "dataset '" + dataset.name + "' has no entities");
  ExperimentData data;
  data.dataset = dataset.name;
  data.n_vars = dataset.entities.front().series.num_variables();
  data.text_dim = dataset_text_dim(dataset);

  for (const auto& entity : dataset.entities) {
    if (entity.series.num_variables() != data.n_vars)
      throw Error(ErrorKind::Shape, "entity '" + entity.series.entity_id + "' has a different variable count");
    TextStream text = entity.text;
    text.entity_id = entity.series.entity_id;
    auto windows = extract_windows(entity.series, text, dataset.window);
    if (windows.size() < 3) {
      data.warnings.push_back("entity '" + entity.series.entity_id + "' yields " + std::to_string(windows.size()) +
                              " windows; skipped");
      continue;
    }
    auto split = chronological_split(std::move(windows));
    auto append = [](std::vector<ForecastWindow>& dst, std::vector<ForecastWindow>& src) {
      std::move(src.begin(), src.end(), std::back_inserter(dst));
    };
    append(data.train_windows, split.train);
    append(data.validation_windows, split.validation);
    append(data.test_windows, split.test);
  }
  if (data.train_windows.empty() || data.validation_windows.empty() || data.test_windows.empty())
    throw Error(ErrorKind::Split, "dataset '" + dataset.name + "' does not produce train, validation and test windows");

  std::vector<ForecastWindow> all;
  for (const auto* part : {&data.train_windows, &data.validation_windows, &data.test_windows})
    all.insert(all.end(), part->begin(), part->end());
  data.length = compute_global_resolution(all);
  data.normalization = fit_normalization(data.train_windows, data.n_vars);

  auto prepare_all = [&](const std::vector<ForecastWindow>& src, std::vector<PreparedWindow>& dst) {
    dst.reserve(src.size());
    for (const auto& w : src) dst.push_back(prepare_window(w, data.length, data.normalization));
  };
  prepare_all(data.train_windows, data.train);
  prepare_all(data.validation_windows, data.validation);
  prepare_all(data.test_windows, data.test);
  return data;
}

PipelineConfig make_config(const ExperimentData& data, TtfVariant ttf, MmfVariant mmf) {
  PipelineConfig cfg;
  cfg.length = static_cast<Eigen::Index>(data.length);
  cfg.n_vars = static_cast<Eigen::Index>(data.n_vars);
  cfg.text_dim = static_cast<Eigen::Index>(data.text_dim);
  cfg.ttf = ttf;
  cfg.mmf = mmf;
  if (cfg.multimodal() && cfg.text_dim == 0) throw Error(ErrorKind::Input, "multimodal pipeline needs text embeddings");
  return cfg;
}

VariantOutcome run_variant(const ExperimentData& data, PipelineConfig config, const TrainConfig& tc) {
  VariantOutcome out;
  out.config = config;
  out.training = train(config, init_pipeline<double>(config, tc.seed), data.train, data.validation, tc);
  out.test_mse = evaluate_mse(config, out.training.params, data.test);
  return out;
}

double Comparison::relative_improvement_pct() const {
  const double base = unimodal.test_mse;
  return 100.0 * (base - candidates.at(selected).test_mse) / base;
}

Comparison compare_variants(const ExperimentData& data, const std::vector<PipelineConfig>& candidates,
                            const TrainConfig& tc) {
  if (candidates.empty()) throw Error(ErrorKind::Input, "no candidate fusion configurations");
  Comparison cmp;
  cmp.unimodal = run_variant(data, make_config(data, TtfVariant::RecAvg, MmfVariant::None), tc);
  for (const auto& cfg : candidates) cmp.candidates.push_back(run_variant(data, cfg, tc));
  for (std::size_t i = 1; i < cmp.candidates.size(); ++i)
    if (cmp.candidates[i].training.best_val_mse < cmp.candidates[cmp.selected].training.best_val_mse) cmp.selected = i;
  return cmp;
}

std::string to_json(const RunSummary& s, int indent) {
  nlohmann::ordered_json j;
  j["dataset"] = s.dataset;
  j["variant"] = s.variant;
  j["seed"] = s.seed;
  j["epochs_run"] = s.epochs_run;
  j["best_val_mse"] = s.best_val_mse;
  j["test_mse"] = s.test_mse;
  j["test_mse_unimodal"] = s.test_mse_unimodal ? nlohmann::ordered_json(*s.test_mse_unimodal) : nullptr;
  j["relative_improvement_pct"] =
      s.relative_improvement_pct ? nlohmann::ordered_json(*s.relative_improvement_pct) : nullptr;
  return j.dump(indent);
}

}  // namespace immtsf
