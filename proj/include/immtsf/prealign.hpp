#pragma once

#include "immtsf/core.hpp"

#include <string>
#include <vector>

namespace immtsf {

/// Fixed-length grid: past rows, then one row per distinct query time, then zero padding.
struct AlignedWindow {
  std::vector<double> grid_timestamps;  // normalized to [0, 1] over [t_start, t_end]; padding rows are 0
  MatrixXd values;                      // L x N, zero where unobserved
  MatrixXd mask;                        // L x N in {0, 1}
  std::vector<int> query_flags;         // L
  std::size_t num_rows = 0;             // real (non-padding) rows
  double t_start = 0.0;
  double t_end = 1.0;

  std::size_t length() const { return grid_timestamps.size(); }
  std::size_t num_variables() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t feature_width() const { return 2 * num_variables() + 1; }
  std::vector<std::size_t> query_rows() const;
  double denormalize(double t) const { return t_start + t * (t_end - t_start); }
};

double normalize_time(double t, double t_start, double t_end);

/// Distinct past timestamps plus distinct query timestamps of one window.
std::size_t distinct_timestamp_count(const ForecastWindow& window);

/// Global resolution L: the largest distinct-timestamp count over all windows.
std::size_t compute_global_resolution(const std::vector<ForecastWindow>& windows);

/// Sorted distinct query timestamps of a window, shared across variables.
std::vector<double> query_times(const ForecastWindow& window);

AlignedWindow align(const ForecastWindow& window, std::size_t length);

/// Row l is [values(l, :), mask(l, :), t_l], width 2N + 1.
MatrixXd feature_expand(const AlignedWindow& aligned);

/// {"t": [...], "values": [[...]], "mask": [[...]], "query": [...]} on one line.
std::string to_jsonl(const AlignedWindow& aligned);

}  // namespace immtsf
