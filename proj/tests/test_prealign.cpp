#include <doctest.h>

#include "support.hpp"

#include "immtsf/prealign.hpp"

#include <json.hpp>

#include <map>
#include <random>
#include <set>

using namespace immtsf;

namespace {

ForecastWindow small_window() {
  ForecastWindow w;
  w.entity_id = "e";
  w.t_start = 0;
  w.t_cut = 10;
  w.t_end = 20;
  w.past = {"e", {{"a", {{0, 1.5}, {10, 2.5}}}, {"b", {{10, -4.0}}}}};
  w.text_past.entity_id = "e";
  w.queries = {{20}, {20}};
  w.targets = {{3.0}, {-5.0}};
  return w;
}

}  // namespace

TEST_CASE("grid construction for a two-variable window") {
  const auto a = align(small_window(), 4);
  CHECK(a.grid_timestamps == std::vector<double>{0.0, 0.5, 1.0, 0.0});
  CHECK(a.query_flags == std::vector<int>{0, 0, 1, 0});
  MatrixXd mask(4, 2);
  mask << 1, 0, 1, 1, 0, 0, 0, 0;
  CHECK(a.mask == mask);
  MatrixXd values(4, 2);
  values << 1.5, 0, 2.5, -4.0, 0, 0, 0, 0;
  CHECK(a.values == values);
  CHECK(a.num_rows == 3);
  CHECK(a.query_rows() == std::vector<std::size_t>{2});
}

TEST_CASE("feature expansion layout") {
  const auto x = feature_expand(align(small_window(), 4));
  REQUIRE(x.cols() == 5);
  CHECK(x.row(1) == (RowVector<double>(5) << 2.5, -4.0, 1, 1, 0.5).finished());
  CHECK(x.row(2) == (RowVector<double>(5) << 0, 0, 0, 0, 1.0).finished());
  CHECK(x.row(3).isZero());

  ForecastWindow one;
  one.t_start = 0;
  one.t_cut = 1;
  one.t_end = 2;
  one.past = {"e", {{"a", {{1, 2.5}}}}};
  one.queries = {{}};
  one.targets = {{}};
  const auto y = feature_expand(align(one, 1));
  CHECK(y.row(0) == (RowVector<double>(3) << 2.5, 1, 0.5).finished());
}

TEST_CASE("global resolution counts distinct timestamps") {
  std::vector<ForecastWindow> ws(2);
  for (auto& w : ws) {
    w.t_start = 0;
    w.t_cut = 10;
    w.t_end = 20;
  }
  ws[0].past = {"e", {{"a", {{1, 0}, {2, 0}, {3, 0}}}}};
  ws[0].queries = {{11}};
  ws[0].targets = {{0}};
  ws[1].past = {"e", {{"a", {{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}}}}};
  ws[1].queries = {{11, 12}};
  ws[1].targets = {{0, 0}};
  CHECK(compute_global_resolution(ws) == 7);
  CHECK(compute_global_resolution({ws[0]}) == 4);

  ForecastWindow shared;
  shared.t_end = 5;
  shared.t_cut = 2;
  shared.past = {"e", {{"a", {{0, 0}, {1, 0}}}, {"b", {{1, 0}, {2, 0}}}}};
  shared.queries = {{3}, {}};
  shared.targets = {{0}, {}};
  CHECK(distinct_timestamp_count(shared) == 4);
  CHECK_THROWS_AS(compute_global_resolution({}), Error);
}

TEST_CASE("unobserved variables and exact fits") {
  auto w = small_window();
  w.past.variables[1].observations.clear();
  const auto a = align(w, 3);
  CHECK(a.mask.col(1).isZero());

  ForecastWindow full;
  full.t_start = 0;
  full.t_cut = 2;
  full.t_end = 4;
  full.past = {"e", {{"a", {{0, 1}, {1, 2}, {2, 3}}}}};
  full.queries = {{}};
  full.targets = {{}};
  const auto b = align(full, 3);
  CHECK(b.num_rows == 3);
  CHECK(b.query_rows().empty());
}

TEST_CASE("alignment errors") {
  CHECK_THROWS_AS(align(small_window(), 2), Error);
  auto dup = small_window();
  dup.past.variables[0].observations = {{5, 1.0}, {5, 2.0}};
  try {
    align(dup, 8);
    FAIL("expected an ambiguity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Ambiguity);
  }
}

TEST_CASE("round trip over random windows") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t N = 1 + trial % 3;
    const auto w = testing_support::random_window(rng, N);
    const std::size_t L = distinct_timestamp_count(w) + trial % 3;
    const auto a = align(w, L);

    // denormalized times are compared after rounding away the last few bits
    auto key = [](double t, std::size_t n) { return std::make_pair(std::llround(t * 1e6), n); };
    std::map<std::pair<long long, std::size_t>, double> recovered;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t n = 0; n < N; ++n)
        if (a.mask(l, n) == 1.0) recovered[key(a.denormalize(a.grid_timestamps[l]), n)] = a.values(l, n);
    std::size_t observed = 0;
    for (std::size_t n = 0; n < N; ++n) {
      for (const auto& o : w.past.variables[n].observations) {
        ++observed;
        auto it = recovered.find(key(o.timestamp, n));
        REQUIRE(it != recovered.end());
        CHECK(it->second == o.value);
      }
    }
    CHECK(a.mask.sum() == static_cast<double>(observed));
    CHECK(feature_expand(a).cols() == static_cast<Eigen::Index>(2 * N + 1));

    std::set<double> distinct_queries;
    for (const auto& q : w.queries) distinct_queries.insert(q.begin(), q.end());
    const auto rows = a.query_rows();
    CHECK(rows.size() == distinct_queries.size());
    for (auto r : rows) {
      CHECK(a.mask.row(r).isZero());
      CHECK(a.values.row(r).isZero());
    }
  }
}

TEST_CASE("timestamp normalization") {
  CHECK(normalize_time(15, 10, 20) == 0.5);
  CHECK_THROWS_AS(normalize_time(1, 3, 3), Error);
  // on the unit window normalizing again changes nothing
  for (double t : {0.0, 0.125, 0.5, 1.0}) CHECK(normalize_time(normalize_time(t, 0, 1), 0, 1) == t);
}

TEST_CASE("JSON Lines output") {
  const auto line = to_jsonl(align(small_window(), 4));
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(line);
  CHECK(j["t"].size() == 4);
  CHECK(j["mask"][1] == nlohmann::json::array({1, 1}));
  CHECK(j["query"] == nlohmann::json::array({0, 0, 1, 0}));
  CHECK(line.rfind("{\"t\":", 0) == 0);
}
