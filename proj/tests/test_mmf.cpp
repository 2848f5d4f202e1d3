#include <doctest.h>

#include "support.hpp"

#include "immtsf/mmf.hpp"

using namespace immtsf;
using testing_support::max_abs_diff;
using testing_support::to_eigen;

namespace {

struct FusionInputs {
  using Scalar = double;
  MatrixXd forecast, context;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("forecast", self.forecast);
    f("context", self.context);
  }
};

}  // namespace

TEST_CASE("GR-Add with a saturated gate returns the forecast") {
  std::mt19937_64 rng(1);
  nn::Initializer init(1);
  auto p = GrAddParams<double>::init(3, 4, 5, init);
  p.gate_weight.setZero();
  p.gate_bias.setConstant(40.0);
  const MatrixXd y = to_eigen(oracle::random_matrix(6, 3, rng));
  const MatrixXd e = to_eigen(oracle::random_matrix(6, 4, rng));
  CHECK((gr_add(y, e, p) - y).cwiseAbs().maxCoeff() < 1e-9);

  p.gate_bias.setConstant(-40.0);
  GrAddCache<double> cache;
  const MatrixXd open = gr_add(y, e, p, &cache);
  CHECK((open - (y + cache.delta)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GR-Add scalar case by hand") {
  nn::Initializer init(9);
  auto p = GrAddParams<double>::init(1, 1, 1, init);
  const MatrixXd y = (MatrixXd(2, 1) << 0.3, -0.7).finished();
  const MatrixXd e = (MatrixXd(2, 1) << 1.1, 0.4).finished();
  const MatrixXd fused = gr_add(y, e, p);

  double h = 0.0;
  for (int t = 0; t < 2; ++t) {
    const double a = y(t, 0), b = e(t, 0);
    // each gate sees its own input projection, folded into a unit input
    const oracle::ScalarGru cell{p.gru.Wz(0, 0) * a + p.gru.Wz(0, 1) * b, p.gru.Uz(0, 0), p.gru.bz(0),
                                 p.gru.Wr(0, 0) * a + p.gru.Wr(0, 1) * b, p.gru.Ur(0, 0), p.gru.br(0),
                                 p.gru.Wh(0, 0) * a + p.gru.Wh(0, 1) * b, p.gru.Uh(0, 0), p.gru.bh(0)};
    h = cell.step(1.0, h);
    const double delta = p.delta_weight(0, 0) * h + p.delta_bias(0);
    const double g = oracle::sigmoid(p.gate_weight(0, 0) * a + p.gate_weight(0, 1) * b + p.gate_bias(0));
    CHECK(std::abs(fused(t, 0) - (g * a + (1.0 - g) * (a + delta))) < 1e-12);
    CHECK(std::abs(fused(t, 0) - (a + (1.0 - g) * delta)) < 1e-12);
  }
}

TEST_CASE("GR-Add gate stays inside the unit interval") {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    nn::Initializer init(seed);
    const auto p = GrAddParams<double>::init(2, 3, 4, init);
    GrAddCache<double> cache;
    const MatrixXd y = to_eigen(oracle::random_matrix(5, 2, rng, 3.0));
    gr_add(y, to_eigen(oracle::random_matrix(5, 3, rng, 3.0)), p, &cache);
    CHECK((cache.gate.array() >= 0.0).all());
    CHECK((cache.gate.array() <= 1.0).all());
    CHECK(cache.hidden.rows() == 5);
  }
}

TEST_CASE("XAttn-Add endpoints of the mixing weight") {
  std::mt19937_64 rng(3);
  nn::Initializer init(3);
  const auto p = XattnAddParams<double>::init(2, 4, init);
  const MatrixXd y = to_eigen(oracle::random_matrix(5, 2, rng));
  const MatrixXd e = to_eigen(oracle::random_matrix(5, 4, rng));
  CHECK(xattn_add(y, e, p, 0.0) == y);

  XattnAddCache<double> cache;
  const MatrixXd half = xattn_add(y, e, p, 1.0, 1, &cache);
  CHECK((half - 0.5 * (y + cache.delta)).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(xattn_add(y, e, p, -0.1), Error);
  CHECK_THROWS_AS(xattn_add(y, e, p, std::nan("")), Error);
}

TEST_CASE("XAttn-Add matches the scripted oracle") {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    nn::Initializer init(seed);
    const auto p = XattnAddParams<double>::init(3, 4, init);
    const auto y = oracle::random_matrix(6, 3, rng);
    const auto e = oracle::random_matrix(6, 4, rng);
    auto mat = [](const MatrixXd& m) {
      oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
      return out;
    };
    const auto q = oracle::matmul(y, mat(p.query_weight));
    const auto k = oracle::matmul(e, mat(p.key_weight));
    const auto v = oracle::matmul(e, mat(p.value_weight));
    auto delta = oracle::matmul(oracle::attention(q, k, v), mat(p.residual_weight));
    const double kappa = 0.5;
    oracle::Mat expect = y;
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = 0; j < 3; ++j)
        expect[i][j] = (y[i][j] + kappa * (delta[i][j] + p.residual_bias(static_cast<Eigen::Index>(j)))) / (1.0 + kappa);
    CHECK(max_abs_diff(xattn_add(to_eigen(y), to_eigen(e), p, kappa), expect) < 1e-10);
  }
}

TEST_CASE("fusion rejects mismatched row counts") {
  nn::Initializer init(0);
  const auto g = GrAddParams<double>::init(1, 2, 3, init);
  const auto x = XattnAddParams<double>::init(1, 2, init);
  CHECK_THROWS_AS(gr_add(MatrixXd(MatrixXd::Zero(3, 1)), MatrixXd(MatrixXd::Zero(2, 2)), g), Error);
  CHECK_THROWS_AS(xattn_add(MatrixXd(MatrixXd::Zero(3, 1)), MatrixXd(MatrixXd::Zero(2, 2)), x), Error);
}

TEST_CASE("gradient checks for both fusion variants over 20 seeds") {
  double worst_gr = 0.0, worst_gr_inputs = 0.0, worst_x = 0.0, worst_x_inputs = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    nn::Initializer init(seed + 100);
    const int heads = seed % 2 == 0 ? 1 : 2;
    FusionInputs in{to_eigen(oracle::random_matrix(4, 2, rng)), to_eigen(oracle::random_matrix(4, 4, rng))};
    const MatrixXd r = to_eigen(oracle::random_matrix(4, 2, rng));

    const auto g = GrAddParams<double>::init(2, 4, 3, init);
    auto gr_loss = [&](const GrAddParams<double>& q) { return (gr_add(in.forecast, in.context, q).array() * r.array()).sum(); };
    auto gr_grad = [&](const GrAddParams<double>& q) {
      auto out = nn::zeros_like(q);
      GrAddCache<double> cache;
      gr_add(in.forecast, in.context, q, &cache);
      gr_add_backward(q, cache, r, out);
      return out;
    };
    worst_gr = std::max(worst_gr, nn::grad_check(g, gr_loss, gr_grad).max_relative_error);
    auto gr_in_loss = [&](const FusionInputs& q) { return (gr_add(q.forecast, q.context, g).array() * r.array()).sum(); };
    auto gr_in_grad = [&](const FusionInputs& q) {
      auto scratch = nn::zeros_like(g);
      GrAddCache<double> cache;
      gr_add(q.forecast, q.context, g, &cache);
      const auto d = gr_add_backward(g, cache, r, scratch);
      return FusionInputs{d.d_forecast, d.d_context};
    };
    worst_gr_inputs = std::max(worst_gr_inputs, nn::grad_check(in, gr_in_loss, gr_in_grad).max_relative_error);

    const auto x = XattnAddParams<double>::init(2, 4, init);
    auto x_loss = [&](const XattnAddParams<double>& q) {
      return (xattn_add(in.forecast, in.context, q, 0.7, heads).array() * r.array()).sum();
    };
    auto x_grad = [&](const XattnAddParams<double>& q) {
      auto out = nn::zeros_like(q);
      XattnAddCache<double> cache;
      xattn_add(in.forecast, in.context, q, 0.7, heads, &cache);
      xattn_add_backward(q, cache, r, out);
      return out;
    };
    worst_x = std::max(worst_x, nn::grad_check(x, x_loss, x_grad).max_relative_error);
    auto x_in_loss = [&](const FusionInputs& q) {
      return (xattn_add(q.forecast, q.context, x, 0.7, heads).array() * r.array()).sum();
    };
    auto x_in_grad = [&](const FusionInputs& q) {
      auto scratch = nn::zeros_like(x);
      XattnAddCache<double> cache;
      xattn_add(q.forecast, q.context, x, 0.7, heads, &cache);
      const auto d = xattn_add_backward(x, cache, r, scratch);
      return FusionInputs{d.d_forecast, d.d_context};
    };
    worst_x_inputs = std::max(worst_x_inputs, nn::grad_check(in, x_in_loss, x_in_grad).max_relative_error);
  }
  CHECK(worst_gr < 1e-4);
  CHECK(worst_gr_inputs < 1e-4);
  CHECK(worst_x < 1e-4);
  CHECK(worst_x_inputs < 1e-4);
}

TEST_CASE("fusion variant names") {
  CHECK(parse_mmf_variant("gr-add") == MmfVariant::GrAdd);
  CHECK(parse_mmf_variant("XAttn-Add") == MmfVariant::XattnAdd);
  CHECK(std::string(to_string(MmfVariant::GrAdd)) == "GR-Add");
  CHECK_THROWS_AS(parse_mmf_variant("concat"), Error);
}
