#pragma once

// Trainable building blocks with hand-written reverse-mode gradients.
//
// Sequences are stored one time step per row. Every parameter struct exposes a static
// `visit(self, f)` that calls `f(name, matrix)` for each tensor it owns; the generic helpers
// below (views, zeros_like, Adam, grad_check) are built on that single hook.

#include "immtsf/common.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace immtsf::nn {

// ---------------------------------------------------------------------------------------------
// Parameter plumbing

template <typename Ptr>
struct ParamView {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Ptr data = nullptr;

  Eigen::Index size() const { return rows * cols; }
};

/// Flat views over every non-empty tensor in `params`, in visit order.
template <typename Params>
auto param_views(Params& params) {
  using Scalar = typename std::remove_const_t<Params>::Scalar;
  using Ptr = std::conditional_t<std::is_const_v<Params>, const Scalar*, Scalar*>;
  std::vector<ParamView<Ptr>> views;
  std::remove_const_t<Params>::visit(params, [&](const std::string& name, auto& m) {
    if (m.size() > 0) views.push_back({name, m.rows(), m.cols(), m.data()});
  });
  return views;
}

/// Forwards a child's tensors to `f` with `prefix.` prepended to their names.
template <typename Child, typename F>
void visit_child(Child& child, const std::string& prefix, F& f) {
  std::remove_const_t<Child>::visit(child, [&](const std::string& name, auto& m) { f(prefix + "." + name, m); });
}

template <typename Params>
Params zeros_like(const Params& params) {
  Params out = params;
  Params::visit(out, [](const std::string&, auto& m) { m.setZero(); });
  return out;
}

template <typename Params>
std::size_t parameter_count(const Params& params) {
  std::size_t n = 0;
  for (const auto& v : param_views(params)) n += static_cast<std::size_t>(v.size());
  return n;
}

/// Accumulates `other` into `into`; both must come from the same architecture.
template <typename Params>
void accumulate(Params& into, const Params& other, typename Params::Scalar scale = 1) {
  auto dst = param_views(into);
  auto src = param_views(other);
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (Eigen::Index k = 0; k < dst[i].size(); ++k) dst[i].data[k] += scale * src[i].data[k];
}

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initializer.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename Derived>
  void uniform(Eigen::MatrixBase<Derived>& m, Eigen::Index fan_in) {
    using Scalar = typename Derived::Scalar;
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(dist(rng_));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------------------------
// Activations

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-x).exp()).inverse();
}

/// Row-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Given softmax output p and upstream gradient g (same shape), the gradient w.r.t. the logits.
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& p, const Matrix<Scalar>& g) {
  const Vector<Scalar> dot = (p.array() * g.array()).rowwise().sum();
  return (p.array() * (g.colwise() - dot).array()).matrix();
}

// ---------------------------------------------------------------------------------------------
// Dense map: Y = X W^T + b

template <typename S>
struct DenseParams {
  using Scalar = S;
  Matrix<S> weight;  // out x in
  Vector<S> bias;    // out

  static DenseParams init(Eigen::Index in, Eigen::Index out, Initializer& init) {
    DenseParams p{Matrix<S>(out, in), Vector<S>(out)};
    init.uniform(p.weight, in);
    init.uniform(p.bias, in);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("weight", self.weight);
    f("bias", self.bias);
  }
};

template <typename S>
Matrix<S> dense_forward(const DenseParams<S>& p, const Matrix<S>& x) {
  return (x * p.weight.transpose()).rowwise() + p.bias.transpose();
}

/// Accumulates parameter gradients and returns dL/dX.
template <typename S>
Matrix<S> dense_backward(const DenseParams<S>& p, const Matrix<S>& x, const Matrix<S>& dy, DenseParams<S>& grad) {
  grad.weight.noalias() += dy.transpose() * x;
  grad.bias += dy.colwise().sum().transpose();
  return dy * p.weight;
}

// ---------------------------------------------------------------------------------------------
// Time2Vec: phi(t) = [w0 t + b0, sin(w1 t + b1), ..., sin(w_{k-1} t + b_{k-1})]

template <typename S>
struct Time2VecParams {
  using Scalar = S;
  Vector<S> omega;
  Vector<S> phase;

  Eigen::Index dim() const { return omega.size(); }

  static Time2VecParams init(Eigen::Index dim, Initializer& init) {
    if (dim < 1) throw Error(ErrorKind::Input, "Time2Vec dimension must be at least 1");
    Time2VecParams p{Vector<S>(dim), Vector<S>(dim)};
    init.uniform(p.omega, 1);
    init.uniform(p.phase, 1);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("omega", self.omega);
    f("phase", self.phase);
  }
};

template <typename S>
Vector<S> time2vec(S tau, const Time2VecParams<S>& p) {
  Vector<S> out = (p.omega * tau + p.phase).array().sin().matrix();
  out(0) = p.omega(0) * tau + p.phase(0);
  return out;
}

/// One row per timestamp.
template <typename S>
Matrix<S> time2vec(const Vector<S>& taus, const Time2VecParams<S>& p) {
  Matrix<S> out(taus.size(), p.dim());
  for (Eigen::Index i = 0; i < taus.size(); ++i) out.row(i) = time2vec(taus(i), p).transpose();
  return out;
}

template <typename S>
void time2vec_backward(const Vector<S>& taus, const Time2VecParams<S>& p, const Matrix<S>& dphi,
                       Time2VecParams<S>& grad) {
  for (Eigen::Index i = 0; i < taus.size(); ++i) {
    const S tau = taus(i);
    for (Eigen::Index k = 0; k < p.dim(); ++k) {
      const S local = k == 0 ? S(1) : std::cos(p.omega(k) * tau + p.phase(k));
      grad.omega(k) += dphi(i, k) * local * tau;
      grad.phase(k) += dphi(i, k) * local;
    }
  }
}

// ---------------------------------------------------------------------------------------------
// GRU
//
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wh x + Uh (r * h) + bh)
//   h' = (1 - z) * h + z * c

template <typename S>
struct GruParams {
  using Scalar = S;
  Matrix<S> Wz, Uz;
  Vector<S> bz;
  Matrix<S> Wr, Ur;
  Vector<S> br;
  Matrix<S> Wh, Uh;
  Vector<S> bh;

  Eigen::Index input_dim() const { return Wz.cols(); }
  Eigen::Index hidden_dim() const { return Wz.rows(); }

  static GruParams init(Eigen::Index in, Eigen::Index hidden, Initializer& init) {
    GruParams p;
    for (auto* w : {&p.Wz, &p.Wr, &p.Wh}) {
      w->resize(hidden, in);
      init.uniform(*w, in);
    }
    for (auto* u : {&p.Uz, &p.Ur, &p.Uh}) {
      u->resize(hidden, hidden);
      init.uniform(*u, hidden);
    }
    for (auto* b : {&p.bz, &p.br, &p.bh}) {
      b->resize(hidden);
      init.uniform(*b, hidden);
    }
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("Wz", self.Wz);
    f("Uz", self.Uz);
    f("bz", self.bz);
    f("Wr", self.Wr);
    f("Ur", self.Ur);
    f("br", self.br);
    f("Wh", self.Wh);
    f("Uh", self.Uh);
    f("bh", self.bh);
  }
};

template <typename S>
struct GruCache {
  Matrix<S> inputs;  // T x in
  Matrix<S> h_prev;  // T x h
  Matrix<S> z, r, c; // T x h
};

/// Hidden state sequence (T x h) from h0 = 0.
template <typename S>
Matrix<S> gru_forward(const GruParams<S>& p, const Matrix<S>& inputs, GruCache<S>* cache = nullptr) {
  if (inputs.cols() != p.input_dim())
    throw Error(ErrorKind::Shape, "GRU expects input width " + std::to_string(p.input_dim()) + ", got " +
                                      std::to_string(inputs.cols()));
  const Eigen::Index T = inputs.rows(), H = p.hidden_dim();
  Matrix<S> hs(T, H);
  if (cache) {
    cache->inputs = inputs;
    cache->h_prev.resize(T, H);
    cache->z.resize(T, H);
    cache->r.resize(T, H);
    cache->c.resize(T, H);
  }
  Vector<S> h = Vector<S>::Zero(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector<S> x = inputs.row(t).transpose();
    const Vector<S> z = sigmoid((p.Wz * x + p.Uz * h + p.bz).array()).matrix();
    const Vector<S> r = sigmoid((p.Wr * x + p.Ur * h + p.br).array()).matrix();
    const Vector<S> c = (p.Wh * x + p.Uh * r.cwiseProduct(h) + p.bh).array().tanh().matrix();
    if (cache) {
      cache->h_prev.row(t) = h.transpose();
      cache->z.row(t) = z.transpose();
      cache->r.row(t) = r.transpose();
      cache->c.row(t) = c.transpose();
    }
    h = (Vector<S>::Ones(H) - z).cwiseProduct(h) + z.cwiseProduct(c);
    hs.row(t) = h.transpose();
  }
  return hs;
}

/// Backpropagation through time; accumulates into `grad`, returns dL/dinputs.
template <typename S>
Matrix<S> gru_backward(const GruParams<S>& p, const GruCache<S>& cache, const Matrix<S>& d_hidden, GruParams<S>& grad) {
  const Eigen::Index T = cache.inputs.rows(), H = p.hidden_dim();
  Matrix<S> d_inputs = Matrix<S>::Zero(T, p.input_dim());
  Vector<S> dh_next = Vector<S>::Zero(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Vector<S> x = cache.inputs.row(t).transpose();
    const Vector<S> h = cache.h_prev.row(t).transpose();
    const Vector<S> z = cache.z.row(t).transpose();
    const Vector<S> r = cache.r.row(t).transpose();
    const Vector<S> c = cache.c.row(t).transpose();
    const Vector<S> dh_out = d_hidden.row(t).transpose() + dh_next;

    const Vector<S> dz = dh_out.cwiseProduct(c - h);
    const Vector<S> dc = dh_out.cwiseProduct(z);
    Vector<S> dh = dh_out.cwiseProduct(Vector<S>::Ones(H) - z);

    const Vector<S> da_h = dc.array() * (S(1) - c.array().square());
    const Vector<S> rh = r.cwiseProduct(h);
    grad.Wh.noalias() += da_h * x.transpose();
    grad.Uh.noalias() += da_h * rh.transpose();
    grad.bh += da_h;
    const Vector<S> d_rh = p.Uh.transpose() * da_h;
    const Vector<S> dr = d_rh.cwiseProduct(h);
    dh += d_rh.cwiseProduct(r);

    const Vector<S> da_z = dz.array() * z.array() * (S(1) - z.array());
    grad.Wz.noalias() += da_z * x.transpose();
    grad.Uz.noalias() += da_z * h.transpose();
    grad.bz += da_z;

    const Vector<S> da_r = dr.array() * r.array() * (S(1) - r.array());
    grad.Wr.noalias() += da_r * x.transpose();
    grad.Ur.noalias() += da_r * h.transpose();
    grad.br += da_r;

    dh += p.Uz.transpose() * da_z + p.Ur.transpose() * da_r;
    d_inputs.row(t) = (p.Wz.transpose() * da_z + p.Wr.transpose() * da_r + p.Wh.transpose() * da_h).transpose();
    dh_next = dh;
  }
  return d_inputs;
}

// ---------------------------------------------------------------------------------------------
// Scaled dot-product attention, split into `heads` column blocks.

template <typename S>
struct AttentionCache {
  Matrix<S> q, k, v;
  std::vector<Matrix<S>> probs;  // one Tq x Tk matrix per head
  int heads = 1;
};

/// softmax(Q K^T / sqrt(d_head)) V per head, outputs concatenated by column.
template <typename S>
Matrix<S> attention(const Matrix<S>& q, const Matrix<S>& k, const Matrix<S>& v, int heads = 1,
                    AttentionCache<S>* cache = nullptr) {
  if (k.rows() == 0 || v.rows() == 0) throw Error(ErrorKind::NoKeys, "attention needs at least one key");
  if (k.rows() != v.rows()) throw Error(ErrorKind::Shape, "keys and values differ in row count");
  if (q.cols() != k.cols()) throw Error(ErrorKind::Shape, "queries and keys differ in width");
  if (heads < 1 || q.cols() % heads != 0 || v.cols() % heads != 0)
    throw Error(ErrorKind::Shape, "head count must divide the attention width");

  const Eigen::Index dk = q.cols() / heads, dv = v.cols() / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  Matrix<S> out(q.rows(), v.cols());
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->heads = heads;
    cache->probs.clear();
  }
  for (int hd = 0; hd < heads; ++hd) {
    const Matrix<S> scores = q.middleCols(hd * dk, dk) * k.middleCols(hd * dk, dk).transpose() * scale;
    Matrix<S> probs = softmax_rows(scores);
    out.middleCols(hd * dv, dv).noalias() = probs * v.middleCols(hd * dv, dv);
    if (cache) cache->probs.push_back(std::move(probs));
  }
  return out;
}

template <typename S>
struct AttentionGrads {
  Matrix<S> dq, dk, dv;
};

template <typename S>
AttentionGrads<S> attention_backward(const AttentionCache<S>& cache, const Matrix<S>& d_out) {
  const int heads = cache.heads;
  const Eigen::Index dk = cache.q.cols() / heads, dv = cache.v.cols() / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  AttentionGrads<S> g{Matrix<S>::Zero(cache.q.rows(), cache.q.cols()), Matrix<S>::Zero(cache.k.rows(), cache.k.cols()),
                      Matrix<S>::Zero(cache.v.rows(), cache.v.cols())};
  for (int hd = 0; hd < heads; ++hd) {
    const Matrix<S>& probs = cache.probs[static_cast<std::size_t>(hd)];
    const Matrix<S> d_o = d_out.middleCols(hd * dv, dv);
    g.dv.middleCols(hd * dv, dv).noalias() = probs.transpose() * d_o;
    const Matrix<S> d_probs = d_o * cache.v.middleCols(hd * dv, dv).transpose();
    const Matrix<S> d_scores = softmax_rows_backward(probs, d_probs) * scale;
    g.dq.middleCols(hd * dk, dk).noalias() = d_scores * cache.k.middleCols(hd * dk, dk);
    g.dk.middleCols(hd * dk, dk).noalias() = d_scores.transpose() * cache.q.middleCols(hd * dk, dk);
  }
  return g;
}

// ---------------------------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Params>
struct AdamState {
  AdamConfig config;
  long step = 0;
  Params first_moment;
  Params second_moment;

  AdamState() = default;
  AdamState(const Params& like, AdamConfig cfg)
      : config(cfg), first_moment(zeros_like(like)), second_moment(zeros_like(like)) {}
};

/// Bias-corrected Adam update. Throws Error(Divergence) before touching anything if a gradient is NaN.
template <typename Params>
void adam_step(Params& params, const Params& grads, AdamState<Params>& state) {
  using Scalar = typename Params::Scalar;
  auto p = param_views(params);
  auto g = param_views(grads);
  auto m = param_views(state.first_moment);
  auto v = param_views(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw Error(ErrorKind::Shape, "Adam parameter groups do not match");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) throw Error(ErrorKind::Shape, "gradient shape mismatch for " + p[i].name);
    for (Eigen::Index k = 0; k < g[i].size(); ++k)
      if (std::isnan(g[i].data[k])) throw Error(ErrorKind::Divergence, "NaN gradient in " + g[i].name);
  }

  ++state.step;
  const auto& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    Eigen::Map<Arr> param(p[i].data, p[i].size());
    Eigen::Map<const Arr> grad(g[i].data, g[i].size());
    Eigen::Map<Arr> mom1(m[i].data, m[i].size());
    Eigen::Map<Arr> mom2(v[i].data, v[i].size());
    mom1 = Scalar(c.beta1) * mom1 + Scalar(1 - c.beta1) * grad;
    mom2 = Scalar(c.beta2) * mom2 + Scalar(1 - c.beta2) * grad.square();
    param -= Scalar(c.learning_rate) * (mom1 / Scalar(correction1)) /
             ((mom2 / Scalar(correction2)).sqrt() + Scalar(c.epsilon));
  }
}

// ---------------------------------------------------------------------------------------------
// Gradient check

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Compares `gradient(params)` against central finite differences of `loss`.
///
/// The error of one entry is |analytic - numeric| / max(1, |numeric|); the maximum is returned.
template <typename Params, typename LossFn, typename GradFn>
GradCheckResult grad_check(const Params& params, LossFn&& loss, GradFn&& gradient, double step = 1e-5) {
  const Params analytic = gradient(params);
  Params probe = params;
  auto probe_views = param_views(probe);
  const auto grad_views = param_views(analytic);
  if (probe_views.size() != grad_views.size()) throw Error(ErrorKind::CheckFailure, "gradient layout mismatch");

  GradCheckResult result;
  for (std::size_t i = 0; i < probe_views.size(); ++i) {
    for (Eigen::Index k = 0; k < probe_views[i].size(); ++k) {
      auto& x = probe_views[i].data[k];
      const auto saved = x;
      x = saved + step;
      const double up = static_cast<double>(loss(static_cast<const Params&>(probe)));
      x = saved - step;
      const double down = static_cast<double>(loss(static_cast<const Params&>(probe)));
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = static_cast<double>(grad_views[i].data[k]);
      if (!std::isfinite(numeric) || !std::isfinite(a))
        throw Error(ErrorKind::CheckFailure, "non-finite value while checking " + probe_views[i].name);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = probe_views[i].name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace immtsf::nn
