#pragma once

// Multimodality fusion: merge per-query text contexts E (T_f x d) into the numeric
// forecast Y_ts (T_f x N).

#include "immtsf/nn.hpp"

#include <string>

namespace immtsf {

enum class MmfVariant { None, GrAdd, XattnAdd };

const char* to_string(MmfVariant v);
MmfVariant parse_mmf_variant(const std::string& name);

template <typename S>
struct FusionGrads {
  Matrix<S> d_forecast;  // T_f x N
  Matrix<S> d_context;   // T_f x d
};

inline void check_fusion_shapes(Eigen::Index forecast_rows, Eigen::Index context_rows) {
  if (forecast_rows != context_rows)
    throw Error(ErrorKind::Shape, "forecast has " + std::to_string(forecast_rows) + " rows but text context has " +
                                      std::to_string(context_rows));
}

// ---------------------------------------------------------------------------------------------
// GR-Add
//
//   z_k = [y_k ; e_k],  H = GRU(z),  dY = H W_delta^T + b_delta,  G = sigmoid(Z W_gate^T + b_gate)
//   Y_fused = G * Y_ts + (1 - G) * (Y_ts + dY) = Y_ts + (1 - G) * dY

template <typename S>
struct GrAddParams {
  using Scalar = S;
  nn::GruParams<S> gru;    // input N + d, hidden h
  Matrix<S> delta_weight;  // N x h
  Vector<S> delta_bias;    // N
  Matrix<S> gate_weight;   // N x (N + d)
  Vector<S> gate_bias;     // N

  static GrAddParams init(Eigen::Index n_vars, Eigen::Index dim, Eigen::Index hidden, nn::Initializer& init) {
    GrAddParams p;
    p.gru = nn::GruParams<S>::init(n_vars + dim, hidden, init);
    p.delta_weight.resize(n_vars, hidden);
    init.uniform(p.delta_weight, hidden);
    p.delta_bias.resize(n_vars);
    init.uniform(p.delta_bias, hidden);
    p.gate_weight.resize(n_vars, n_vars + dim);
    init.uniform(p.gate_weight, n_vars + dim);
    p.gate_bias.resize(n_vars);
    init.uniform(p.gate_bias, n_vars + dim);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    nn::visit_child(self.gru, "gru", f);
    f("delta_weight", self.delta_weight);
    f("delta_bias", self.delta_bias);
    f("gate_weight", self.gate_weight);
    f("gate_bias", self.gate_bias);
  }
};

template <typename S>
struct GrAddCache {
  Matrix<S> joint;   // Z = [Y_ts, E]
  nn::GruCache<S> gru;
  Matrix<S> hidden;  // H
  Matrix<S> delta;   // dY
  Matrix<S> gate;    // G
};

template <typename S>
Matrix<S> gr_add(const Matrix<S>& forecast, const Matrix<S>& context, const GrAddParams<S>& p,
                 GrAddCache<S>* cache = nullptr) {
  check_fusion_shapes(forecast.rows(), context.rows());
  if (p.gate_weight.cols() != forecast.cols() + context.cols())
    throw Error(ErrorKind::Shape, "GR-Add gate expects width N + d");
  GrAddCache<S> local;
  auto* c = cache ? cache : &local;
  c->joint.resize(forecast.rows(), forecast.cols() + context.cols());
  c->joint << forecast, context;
  c->hidden = nn::gru_forward(p.gru, c->joint, &c->gru);
  c->delta = (c->hidden * p.delta_weight.transpose()).rowwise() + p.delta_bias.transpose();
  c->gate = nn::sigmoid(((c->joint * p.gate_weight.transpose()).rowwise() + p.gate_bias.transpose()).array()).matrix();
  return forecast + ((S(1) - c->gate.array()) * c->delta.array()).matrix();
}

template <typename S>
FusionGrads<S> gr_add_backward(const GrAddParams<S>& p, const GrAddCache<S>& c, const Matrix<S>& d_fused,
                               GrAddParams<S>& grad) {
  const Eigen::Index n_vars = p.delta_weight.rows();
  const Matrix<S> d_delta = (d_fused.array() * (S(1) - c.gate.array())).matrix();
  const Matrix<S> d_gate_logits =
      (-d_fused.array() * c.delta.array() * c.gate.array() * (S(1) - c.gate.array())).matrix();

  grad.gate_weight.noalias() += d_gate_logits.transpose() * c.joint;
  grad.gate_bias += d_gate_logits.colwise().sum().transpose();
  grad.delta_weight.noalias() += d_delta.transpose() * c.hidden;
  grad.delta_bias += d_delta.colwise().sum().transpose();

  const Matrix<S> d_hidden = d_delta * p.delta_weight;
  Matrix<S> d_joint = nn::gru_backward(p.gru, c.gru, d_hidden, grad.gru);
  d_joint.noalias() += d_gate_logits * p.gate_weight;

  FusionGrads<S> out;
  out.d_forecast = d_fused + d_joint.leftCols(n_vars);
  out.d_context = d_joint.rightCols(d_joint.cols() - n_vars);
  return out;
}

// ---------------------------------------------------------------------------------------------
// XAttn-Add
//
//   Q = Y_ts W_Q, K = E W_K, V = E W_V, A = softmax(Q K^T / sqrt(d)) V
//   dY = A W_res + b_res,  Y_fused = (Y_ts + kappa dY) / (1 + kappa)

template <typename S>
struct XattnAddParams {
  using Scalar = S;
  Matrix<S> query_weight;     // N x d
  Matrix<S> key_weight;       // d x d
  Matrix<S> value_weight;     // d x d
  Matrix<S> residual_weight;  // d x N
  Vector<S> residual_bias;    // N

  static XattnAddParams init(Eigen::Index n_vars, Eigen::Index dim, nn::Initializer& init) {
    XattnAddParams p{Matrix<S>(n_vars, dim), Matrix<S>(dim, dim), Matrix<S>(dim, dim), Matrix<S>(dim, n_vars),
                     Vector<S>(n_vars)};
    init.uniform(p.query_weight, n_vars);
    init.uniform(p.key_weight, dim);
    init.uniform(p.value_weight, dim);
    init.uniform(p.residual_weight, dim);
    init.uniform(p.residual_bias, dim);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("query_weight", self.query_weight);
    f("key_weight", self.key_weight);
    f("value_weight", self.value_weight);
    f("residual_weight", self.residual_weight);
    f("residual_bias", self.residual_bias);
  }
};

template <typename S>
struct XattnAddCache {
  Matrix<S> forecast, context;
  nn::AttentionCache<S> attention;
  Matrix<S> attended;  // A
  Matrix<S> delta;     // dY
  S kappa = 0;
};

template <typename S>
Matrix<S> xattn_add(const Matrix<S>& forecast, const Matrix<S>& context, const XattnAddParams<S>& p, S kappa = S(0.5),
                    int heads = 1, XattnAddCache<S>* cache = nullptr) {
  check_fusion_shapes(forecast.rows(), context.rows());
  if (!std::isfinite(kappa) || kappa < S(0)) throw Error(ErrorKind::Input, "kappa must be finite and non-negative");
  XattnAddCache<S> local;
  auto* c = cache ? cache : &local;
  c->forecast = forecast;
  c->context = context;
  c->kappa = kappa;
  const Matrix<S> q = forecast * p.query_weight;
  const Matrix<S> k = context * p.key_weight;
  const Matrix<S> v = context * p.value_weight;
  c->attended = nn::attention(q, k, v, heads, &c->attention);
  c->delta = (c->attended * p.residual_weight).rowwise() + p.residual_bias.transpose();
  return (forecast + kappa * c->delta) / (S(1) + kappa);
}

template <typename S>
FusionGrads<S> xattn_add_backward(const XattnAddParams<S>& p, const XattnAddCache<S>& c, const Matrix<S>& d_fused,
                                  XattnAddParams<S>& grad) {
  const Matrix<S> d_delta = d_fused * (c.kappa / (S(1) + c.kappa));
  grad.residual_weight.noalias() += c.attended.transpose() * d_delta;
  grad.residual_bias += d_delta.colwise().sum().transpose();
  const Matrix<S> d_attended = d_delta * p.residual_weight.transpose();
  const auto g = nn::attention_backward(c.attention, d_attended);

  grad.query_weight.noalias() += c.forecast.transpose() * g.dq;
  grad.key_weight.noalias() += c.context.transpose() * g.dk;
  grad.value_weight.noalias() += c.context.transpose() * g.dv;

  FusionGrads<S> out;
  out.d_forecast = d_fused / (S(1) + c.kappa) + g.dq * p.query_weight.transpose();
  out.d_context = g.dk * p.key_weight.transpose() + g.dv * p.value_weight.transpose();
  return out;
}

}  // namespace immtsf
