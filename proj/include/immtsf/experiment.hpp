#pragma once

#include "immtsf/forecaster.hpp"
#include "immtsf/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace immtsf {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  int patience = 5;
  int max_epochs = 200;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  PipelineParams<double> params;  // best-validation parameters
  std::vector<EpochRecord> history;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_mse = 0.0;
};

/// Pooled mask-aware MSE over every valid target entry of `windows`.
double evaluate_mse(const PipelineConfig& cfg, const PipelineParams<double>& params,
                    const std::vector<PreparedWindow>& windows);

/// Mini-batch Adam on the masked MSE with early stopping on validation MSE.
///
/// Batches pool the squared errors of their windows and divide by the batch's valid-entry count.
/// Training stops once validation MSE has not improved for `patience` consecutive epochs.
TrainResult train(const PipelineConfig& cfg, PipelineParams<double> params, const std::vector<PreparedWindow>& train_set,
                  const std::vector<PreparedWindow>& val_set, const TrainConfig& tc);

struct Dataset {
  std::string name;
  std::vector<EntityData> entities;
  WindowSpec window;
  TimeUnit unit = TimeUnit::Seconds;
  std::size_t text_dim = 0;
};

struct ExperimentData {
  std::string dataset;
  std::size_t length = 0;
  std::size_t n_vars = 0;
  std::size_t text_dim = 0;
  NormalizationStats normalization;
  std::vector<ForecastWindow> train_windows, validation_windows, test_windows;
  std::vector<PreparedWindow> train, validation, test;
  std::vector<std::string> warnings;
};

/// Windows every entity, splits each entity 60/20/20 in time, fits z-scores on the training
/// part and prepares every window at the dataset-wide resolution L.
ExperimentData prepare_experiment(const Dataset& dataset);

struct VariantOutcome {
  PipelineConfig config;
  TrainResult training;
  double test_mse = 0.0;
};

VariantOutcome run_variant(const ExperimentData& data, PipelineConfig config, const TrainConfig& tc);

/// Pipeline configuration for `data` with the given fusion choice.
PipelineConfig make_config(const ExperimentData& data, TtfVariant ttf, MmfVariant mmf);

struct Comparison {
  VariantOutcome unimodal;
  std::vector<VariantOutcome> candidates;
  std::size_t selected = 0;  // best validation MSE among candidates

  double relative_improvement_pct() const;
};

/// Trains the unimodal reference and every candidate fusion configuration with the same seed.
Comparison compare_variants(const ExperimentData& data, const std::vector<PipelineConfig>& candidates,
                            const TrainConfig& tc);

struct RunSummary {
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double best_val_mse = 0.0;
  double test_mse = 0.0;
  std::optional<double> test_mse_unimodal;
  std::optional<double> relative_improvement_pct;
};

/// {dataset, variant, seed, epochs_run, best_val_mse, test_mse, test_mse_unimodal, relative_improvement_pct}
std::string to_json(const RunSummary& s, int indent = 2);

}  // namespace immtsf
