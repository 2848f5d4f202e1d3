#pragma once

#include "oracles.hpp"

#include "immtsf/core.hpp"

#include <random>
#include <set>
#include <string>
#include <vector>

namespace testing_support {

inline immtsf::MatrixXd to_eigen(const oracle::Mat& m) {
  immtsf::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return out;
}

inline immtsf::VectorXd to_eigen(const oracle::Vec& v) {
  return Eigen::Map<const immtsf::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double max_abs_diff(const immtsf::MatrixXd& a, const oracle::Mat& b) {
  return (a - to_eigen(b)).cwiseAbs().maxCoeff();
}

// A window over [0, 100] with cut-off 60. Timestamps come from a coarse grid so variables share
// some of them; every variable gets at least one query.
inline immtsf::ForecastWindow random_window(std::mt19937_64& rng, std::size_t n_vars) {
  immtsf::ForecastWindow w;
  w.entity_id = "e";
  w.t_start = 0.0;
  w.t_cut = 60.0;
  w.t_end = 100.0;
  w.past.entity_id = "e";
  w.text_past.entity_id = "e";
  w.queries.resize(n_vars);
  w.targets.resize(n_vars);
  std::uniform_int_distribution<int> past_slot(0, 24);   // t = 2.5 * slot in [0, 60]
  std::uniform_int_distribution<int> query_slot(1, 16);  // t = 60 + 2.5 * slot in (60, 100]
  std::uniform_int_distribution<int> count(0, 8);
  std::normal_distribution<double> value(0.0, 3.0);
  for (std::size_t n = 0; n < n_vars; ++n) {
    std::set<int> slots;
    const int k = count(rng);
    for (int i = 0; i < k; ++i) slots.insert(past_slot(rng));
    immtsf::Variable v{"x" + std::to_string(n), {}};
    for (int s : slots) v.observations.push_back({2.5 * s, value(rng)});
    w.past.variables.push_back(std::move(v));

    std::set<int> q{query_slot(rng)};
    const int kq = count(rng) / 2;
    for (int i = 0; i < kq; ++i) q.insert(query_slot(rng));
    for (int s : q) {
      w.queries[n].push_back(60.0 + 2.5 * s);
      w.targets[n].push_back(value(rng));
    }
  }
  if (w.past.num_observations() == 0) w.past.variables[0].observations.push_back({10.0, 1.0});
  return w;
}

inline std::vector<immtsf::ForecastWindow> windows_with_starts(const std::vector<double>& starts) {
  std::vector<immtsf::ForecastWindow> out;
  for (double s : starts) {
    immtsf::ForecastWindow w;
    w.entity_id = "e";
    w.t_start = s;
    w.t_cut = s + 1.0;
    w.t_end = s + 2.0;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace testing_support
