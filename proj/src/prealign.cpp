#include "immtsf/prealign.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace immtsf {

std::vector<std::size_t> AlignedWindow::query_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t l = 0; l < query_flags.size(); ++l)
    if (query_flags[l] != 0) rows.push_back(l);
  return rows;
}

double normalize_time(double t, double t_start, double t_end) {
  const double span = t_end - t_start;
  if (!(span > 0.0)) throw Error(ErrorKind::ZeroRange, "window has an empty time range");
  return (t - t_start) / span;
}

namespace {

std::set<double> past_times(const ForecastWindow& window) {
  std::set<double> times;
  for (const auto& var : window.past.variables)
    for (const auto& o : var.observations) times.insert(o.timestamp);
  return times;
}

}  // namespace

std::vector<double> query_times(const ForecastWindow& window) {
  std::set<double> times;
  for (const auto& q : window.queries) times.insert(q.begin(), q.end());
  return {times.begin(), times.end()};
}

std::size_t distinct_timestamp_count(const ForecastWindow& window) {
  return past_times(window).size() + query_times(window).size();
}

std::size_t compute_global_resolution(const std::vector<ForecastWindow>& windows) {
  if (windows.empty()) throw Error(ErrorKind::Input, "cannot determine resolution of an empty window list");
  std::size_t length = 0;
  for (const auto& w : windows) length = std::max(length, distinct_timestamp_count(w));
  return length;
}

AlignedWindow align(const ForecastWindow& window, std::size_t length) {
  const auto past = past_times(window);
  const auto queries = query_times(window);
  const std::size_t rows = past.size() + queries.size();
  if (rows > length)
    throw Error(ErrorKind::Capacity, "window needs " + std::to_string(rows) + " rows but L = " + std::to_string(length));

  const std::size_t n_vars = window.past.variables.size();
  const auto L = static_cast<Eigen::Index>(length);
  AlignedWindow out;
  out.t_start = window.t_start;
  out.t_end = window.t_end;
  out.num_rows = rows;
  out.grid_timestamps.assign(length, 0.0);
  out.query_flags.assign(length, 0);
  out.values = MatrixXd::Zero(L, static_cast<Eigen::Index>(n_vars));
  out.mask = MatrixXd::Zero(L, static_cast<Eigen::Index>(n_vars));

  std::map<double, std::size_t> row_of;
  std::size_t l = 0;
  for (double t : past) {
    row_of[t] = l;
    out.grid_timestamps[l++] = normalize_time(t, window.t_start, window.t_end);
  }
  for (double t : queries) {
    out.query_flags[l] = 1;
    out.grid_timestamps[l++] = normalize_time(t, window.t_start, window.t_end);
  }

  for (std::size_t n = 0; n < n_vars; ++n) {
    for (const auto& o : window.past.variables[n].observations) {
      const auto r = static_cast<Eigen::Index>(row_of.at(o.timestamp));
      const auto c = static_cast<Eigen::Index>(n);
      if (out.mask(r, c) != 0.0)
        throw Error(ErrorKind::Ambiguity, "variable '" + window.past.variables[n].name + "' observed twice at one time");
      out.values(r, c) = o.value;
      out.mask(r, c) = 1.0;
    }
  }
  return out;
}

MatrixXd feature_expand(const AlignedWindow& aligned) {
  const Eigen::Index L = aligned.values.rows();
  const Eigen::Index N = aligned.values.cols();
  MatrixXd x(L, 2 * N + 1);
  x.leftCols(N) = aligned.values;
  x.middleCols(N, N) = aligned.mask;
  x.col(2 * N) = Eigen::Map<const VectorXd>(aligned.grid_timestamps.data(), L);
  return x;
}

std::string to_jsonl(const AlignedWindow& aligned) {
  nlohmann::ordered_json j;
  j["t"] = aligned.grid_timestamps;
  nlohmann::ordered_json values = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < aligned.values.rows(); ++r) {
    std::vector<double> row(aligned.values.cols());
    for (Eigen::Index c = 0; c < aligned.values.cols(); ++c) row[static_cast<std::size_t>(c)] = aligned.values(r, c);
    values.push_back(row);
  }
  j["values"] = values;
  nlohmann::ordered_json mask = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < aligned.mask.rows(); ++r) {
    std::vector<int> row(aligned.mask.cols());
    for (Eigen::Index c = 0; c < aligned.mask.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<int>(aligned.mask(r, c));
    mask.push_back(row);
  }
  j["mask"] = mask;
  j["query"] = aligned.query_flags;
  return j.dump();
}

}  // namespace immtsf
