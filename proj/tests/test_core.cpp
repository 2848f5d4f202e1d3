#include <doctest.h>

#include "support.hpp"

#include "immtsf/core.hpp"

#include <random>

using namespace immtsf;

namespace {

IrregularSeries one_variable(const std::vector<double>& times, const std::string& id = "a") {
  IrregularSeries s{id, {{"x", {}}}};
  for (double t : times) s.variables[0].observations.push_back({t, t / 10.0});
  return s;
}

}  // namespace

TEST_CASE("window boundaries put the cut-off in the past segment") {
  const auto s = one_variable({0, 10, 20, 30});
  const auto windows = extract_windows(s, TextStream{"a", {}}, {20, 20, 10});
  REQUIRE(!windows.empty());
  const auto& w = windows.front();
  CHECK(w.t_start == 0.0);
  CHECK(w.t_cut == 20.0);
  CHECK(w.t_end == 40.0);
  REQUIRE(w.past.variables[0].observations.size() == 3);
  CHECK(w.past.variables[0].observations[2].timestamp == 20.0);
  REQUIRE(w.queries[0] == std::vector<double>{30.0});
  CHECK(w.targets[0] == std::vector<double>{3.0});
}

TEST_CASE("window membership agrees with a brute-force interval scan") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::set<double> ts;
    while (ts.size() < 60) ts.insert(std::round(u(rng) * 4) / 4);
    const auto s = one_variable({ts.begin(), ts.end()});
    const WindowSpec spec{37.5, 12.5, 9.0};
    for (const auto& w : extract_windows(s, TextStream{"a", {}}, spec)) {
      std::vector<double> past, queries;
      for (double t : ts) {
        if (t >= w.t_start && t <= w.t_cut) past.push_back(t);
        if (t > w.t_cut && t <= w.t_end) queries.push_back(t);
      }
      std::vector<double> got;
      for (const auto& o : w.past.variables[0].observations) got.push_back(o.timestamp);
      CHECK(got == past);
      CHECK(w.queries[0] == queries);
      CHECK(!past.empty());
      CHECK(!queries.empty());
    }
  }
}

TEST_CASE("windows without text still carry an empty text stream") {
  const auto windows = extract_windows(one_variable({0, 1, 2, 3, 4, 5}), TextStream{"a", {}}, {2, 1, 1});
  REQUIRE(!windows.empty());
  for (const auto& w : windows) CHECK(w.text_past.records.empty());
}

TEST_CASE("text is restricted to the past segment") {
  TextStream text{"a", {{0.5, {1.0}}, {2.0, {2.0}}, {2.5, {3.0}}}};
  const auto windows = extract_windows(one_variable({0, 1, 2, 3, 4}), text, {2, 1, 1});
  REQUIRE(!windows.empty());
  const auto& w = windows.front();
  REQUIRE(w.text_past.records.size() == 2);
  CHECK(w.text_past.records[1].timestamp == 2.0);
}

TEST_CASE("series shorter than the context yields no windows") {
  CHECK(extract_windows(one_variable({0, 5}), TextStream{"a", {}}, {20, 5, 5}).empty());
}

TEST_CASE("mismatched entity ids are rejected") {
  CHECK_THROWS_AS(extract_windows(one_variable({0, 1, 2}), TextStream{"b", {}}, {1, 1, 1}), Error);
}

TEST_CASE("extraction is deterministic") {
  const auto s = one_variable({0, 1, 3, 4, 7, 8, 9, 12});
  const auto a = extract_windows(s, TextStream{"a", {}}, {3, 2, 1});
  const auto b = extract_windows(s, TextStream{"a", {}}, {3, 2, 1});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].t_start == b[i].t_start);
    CHECK(a[i].queries == b[i].queries);
  }
}

TEST_CASE("split sizes follow the floor rule") {
  auto sizes = [](std::size_t n) {
    const auto s = split_sizes(n);
    return std::vector<std::size_t>{s.train, s.validation, s.test};
  };
  CHECK(sizes(10) == std::vector<std::size_t>{6, 2, 2});
  CHECK(sizes(3) == std::vector<std::size_t>{1, 0, 2});
  CHECK(sizes(5) == std::vector<std::size_t>{3, 1, 1});
  for (std::size_t n = 3; n < 1000; ++n) {
    CHECK(split_sizes(n).train == n * 3 / 5);
    CHECK(split_sizes(n).validation == n / 5);
  }
}

TEST_CASE("chronological split keeps order and rejects tiny inputs") {
  auto split = chronological_split(testing_support::windows_with_starts({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  REQUIRE(split.train.size() == 6);
  CHECK(split.train.back().t_start < split.validation.front().t_start);
  CHECK(split.validation.back().t_start < split.test.front().t_start);
  CHECK_THROWS_AS(chronological_split(testing_support::windows_with_starts({0, 1})), Error);
  CHECK_THROWS_AS(chronological_split(testing_support::windows_with_starts({0, 2, 1})), Error);
}

TEST_CASE("normalization statistics come from training windows") {
  ForecastWindow w;
  w.past = one_variable({0, 1, 2});  // values 0, 0.1, 0.2
  w.queries = {{3}};
  w.targets = {{0.3}};
  const auto stats = fit_normalization({w}, 1);
  CHECK(stats.mean[0] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(0.0125)).epsilon(1e-12));

  ForecastWindow flat;
  flat.past = one_variable({5, 5.5});
  for (auto& o : flat.past.variables[0].observations) o.value = 2.0;
  flat.queries = {{}};
  flat.targets = {{}};
  const auto constant = fit_normalization({flat}, 1);
  CHECK(constant.stddev[0] == 1.0);
  CHECK(constant.normalize(0, 2.0) == 0.0);
}

TEST_CASE("series validation") {
  auto s = one_variable({0, 1, 1});
  CHECK_THROWS_AS(s.validate(), Error);
  IrregularSeries dup{"a", {{"x", {}}, {"x", {}}}};
  CHECK_THROWS_AS(dup.validate(), Error);
  IrregularSeries none{"a", {}};
  CHECK_THROWS_AS(none.validate(), Error);
  TextStream text{"a", {{1.0, {1.0, 2.0}}, {2.0, {1.0}}}};
  CHECK_THROWS_AS(text.validate(), Error);
}
