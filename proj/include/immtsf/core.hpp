#pragma once

#include "immtsf/common.hpp"

#include <string>
#include <vector>

namespace immtsf {

struct Observation {
  double timestamp = 0.0;  // seconds since epoch
  double value = 0.0;
};

struct Variable {
  std::string name;
  std::vector<Observation> observations;
};

/// One entity's multivariate observations; each variable keeps its own timestamps.
struct IrregularSeries {
  std::string entity_id;
  std::vector<Variable> variables;

  std::size_t num_variables() const { return variables.size(); }
  std::size_t num_observations() const;
  /// Throws Error(Input) on non-finite values, non-increasing timestamps, duplicate names or N == 0.
  void validate() const;
};

struct TextRecord {
  double timestamp = 0.0;
  std::vector<double> embedding;
};

struct TextStream {
  std::string entity_id;
  std::vector<TextRecord> records;

  std::size_t dimension() const { return records.empty() ? 0 : records.front().embedding.size(); }
  void validate() const;
};

struct WindowSpec {
  double context_duration = 0.0;
  double horizon_duration = 0.0;
  double stride = 0.0;

  /// Stride defaults to the horizon, giving non-overlapping query segments.
  static WindowSpec with_default_stride(double context, double horizon) {
    return {context, horizon, horizon};
  }
  void validate() const;
};

/// A past segment [t_start, t_cut] and the query segment (t_cut, t_end] of one entity.
struct ForecastWindow {
  std::string entity_id;
  double t_start = 0.0;
  double t_cut = 0.0;
  double t_end = 0.0;
  IrregularSeries past;
  TextStream text_past;
  std::vector<std::vector<double>> queries;  // per variable
  std::vector<std::vector<double>> targets;  // per variable, aligned with queries

  std::size_t num_past_observations() const { return past.num_observations(); }
  std::size_t num_queries() const;
};

struct SplitAssignment {
  std::vector<ForecastWindow> train;
  std::vector<ForecastWindow> validation;
  std::vector<ForecastWindow> test;
};

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

/// Slides a window over one entity, anchored at its first observation.
///
/// Windows advance by `spec.stride` while the cut-off lies before the last observation.
/// Past observations and text come from [t_start, t_cut]; queries and targets are the true
/// observations in (t_cut, t_end]. Windows with no past observations or no queries are dropped.
std::vector<ForecastWindow> extract_windows(const IrregularSeries& series, const TextStream& text,
                                            const WindowSpec& spec);

/// Floor rule: train = floor(n * r_train), validation = floor(n * r_val), test gets the rest.
SplitAssignment chronological_split(std::vector<ForecastWindow> windows, const SplitRatios& ratios = {});

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios = {});

/// Per-variable z-score statistics, estimated from training windows only.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  double normalize(std::size_t variable, double value) const {
    return (value - mean[variable]) / stddev[variable];
  }
};

NormalizationStats fit_normalization(const std::vector<ForecastWindow>& train_windows, std::size_t num_variables);

}  // namespace immtsf
