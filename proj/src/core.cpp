#include "immtsf/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace immtsf {

std::size_t IrregularSeries::num_observations() const {
  std::size_t n = 0;
  for (const auto& v : variables) n += v.observations.size();
  return n;
}

void IrregularSeries::validate() const {
  if (variables.empty()) throw Error(ErrorKind::Input, "series '" + entity_id + "' has no variables");
  std::set<std::string> names;
  for (const auto& var : variables) {
    if (!names.insert(var.name).second)
      throw Error(ErrorKind::Input, "duplicate variable name '" + var.name + "' in '" + entity_id + "'");
    for (std::size_t i = 0; i < var.observations.size(); ++i) {
      const auto& o = var.observations[i];
      if (!std::isfinite(o.timestamp) || !std::isfinite(o.value))
        throw Error(ErrorKind::Input, "non-finite observation in '" + entity_id + "/" + var.name + "'");
      if (i > 0 && !(var.observations[i - 1].timestamp < o.timestamp))
        throw Error(ErrorKind::Input, "timestamps not strictly increasing in '" + entity_id + "/" + var.name + "'");
    }
  }
}

void TextStream::validate() const {
  const std::size_t d = dimension();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!std::isfinite(r.timestamp)) throw Error(ErrorKind::Input, "non-finite text timestamp in '" + entity_id + "'");
    if (r.embedding.size() != d) throw Error(ErrorKind::Shape, "text embeddings of '" + entity_id + "' differ in dimension");
    for (double x : r.embedding)
      if (!std::isfinite(x)) throw Error(ErrorKind::Input, "non-finite embedding entry in '" + entity_id + "'");
    if (i > 0 && records[i - 1].timestamp > r.timestamp)
      throw Error(ErrorKind::Input, "text records of '" + entity_id + "' not sorted by timestamp");
  }
}

void WindowSpec::validate() const {
  if (!(context_duration > 0.0) || !(horizon_duration > 0.0) || !(stride > 0.0))
    throw Error(ErrorKind::Input, "window durations and stride must be positive");
}

std::size_t ForecastWindow::num_queries() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.size();
  return n;
}

std::vector<ForecastWindow> extract_windows(const IrregularSeries& series, const TextStream& text,
                                            const WindowSpec& spec) {
  if (series.entity_id != text.entity_id)
    throw Error(ErrorKind::Input, "series entity '" + series.entity_id + "' does not match text entity '" +
                                      text.entity_id + "'");
  spec.validate();

  double first = std::numeric_limits<double>::infinity();
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& var : series.variables) {
    if (var.observations.empty()) continue;
    first = std::min(first, var.observations.front().timestamp);
    last = std::max(last, var.observations.back().timestamp);
  }
  std::vector<ForecastWindow> windows;
  if (!std::isfinite(first)) return windows;

  for (std::size_t i = 0;; ++i) {
    ForecastWindow w;
    w.entity_id = series.entity_id;
    w.t_start = first + static_cast<double>(i) * spec.stride;
    w.t_cut = w.t_start + spec.context_duration;
    w.t_end = w.t_cut + spec.horizon_duration;
    if (!(w.t_cut < last)) break;

    w.past.entity_id = series.entity_id;
    w.past.variables.reserve(series.variables.size());
    w.queries.resize(series.variables.size());
    w.targets.resize(series.variables.size());
    for (std::size_t n = 0; n < series.variables.size(); ++n) {
      const auto& var = series.variables[n];
      Variable past{var.name, {}};
      for (const auto& o : var.observations) {
        if (o.timestamp >= w.t_start && o.timestamp <= w.t_cut) {
          past.observations.push_back(o);
        } else if (o.timestamp > w.t_cut && o.timestamp <= w.t_end) {
          w.queries[n].push_back(o.timestamp);
          w.targets[n].push_back(o.value);
        }
      }
      w.past.variables.push_back(std::move(past));
    }
    w.text_past.entity_id = text.entity_id;
    for (const auto& r : text.records)
      if (r.timestamp >= w.t_start && r.timestamp <= w.t_cut) w.text_past.records.push_back(r);

    if (w.num_past_observations() == 0 || w.num_queries() == 0) continue;
    windows.push_back(std::move(w));
  }
  return windows;
}

SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios) {
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train));
  s.validation = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.validation));
  s.test = n - s.train - s.validation;
  return s;
}

SplitAssignment chronological_split(std::vector<ForecastWindow> windows, const SplitRatios& ratios) {
  if (windows.size() < 3)
    throw Error(ErrorKind::Split, "need at least 3 windows, got " + std::to_string(windows.size()));
  for (std::size_t i = 1; i < windows.size(); ++i)
    if (windows[i - 1].t_start > windows[i].t_start)
      throw Error(ErrorKind::Split, "windows are not sorted by t_start");

  const auto sizes = split_sizes(windows.size(), ratios);
  SplitAssignment out;
  auto it = std::make_move_iterator(windows.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
  it += static_cast<std::ptrdiff_t>(sizes.train);
  out.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes.validation));
  it += static_cast<std::ptrdiff_t>(sizes.validation);
  out.test.assign(it, std::make_move_iterator(windows.end()));
  return out;
}

NormalizationStats fit_normalization(const std::vector<ForecastWindow>& train_windows, std::size_t num_variables) {
  NormalizationStats stats;
  stats.mean.assign(num_variables, 0.0);
  stats.stddev.assign(num_variables, 1.0);
  for (std::size_t n = 0; n < num_variables; ++n) {
    std::vector<double> values;
    for (const auto& w : train_windows) {
      for (const auto& o : w.past.variables.at(n).observations) values.push_back(o.value);
      values.insert(values.end(), w.targets.at(n).begin(), w.targets.at(n).end());
    }
    if (values.empty()) continue;
    const Eigen::Map<const VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().mean());
    stats.mean[n] = mean;
    // a constant variable keeps unit scale so it maps to zero instead of NaN
    stats.stddev[n] = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

}  // namespace immtsf
