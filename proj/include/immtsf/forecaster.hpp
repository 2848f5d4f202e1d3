#pragma once

// Reference linear forecaster over pre-aligned windows and the full multimodal pipeline
// (forecaster -> text fusion -> modality fusion).

#include "immtsf/core.hpp"
#include "immtsf/mmf.hpp"
#include "immtsf/prealign.hpp"
#include "immtsf/ttf.hpp"

#include <string>
#include <vector>

namespace immtsf {

// ---------------------------------------------------------------------------------------------
// Linear forecaster

template <typename S>
struct LinearForecasterParams {
  using Scalar = S;
  Matrix<S> weight;  // N x L(2N+1), applied to the row-major flattened expanded window
  Matrix<S> bias;    // L x N, one offset per grid row and variable

  static LinearForecasterParams init(Eigen::Index length, Eigen::Index n_vars, nn::Initializer& init) {
    const Eigen::Index fan_in = length * (2 * n_vars + 1);
    LinearForecasterParams p{Matrix<S>(n_vars, fan_in), Matrix<S>(length, n_vars)};
    init.uniform(p.weight, fan_in);
    init.uniform(p.bias, fan_in);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("weight", self.weight);
    f("bias", self.bias);
  }
};

/// Row-major flattening of an expanded L x (2N+1) window.
inline VectorXd flatten_rows(const MatrixXd& expanded) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = expanded;
  return Eigen::Map<const VectorXd>(rm.data(), rm.size());
}

/// Predictions at the query rows, one row per query in grid order (T_f x N).
template <typename S>
Matrix<S> forecast_unimodal(const Vector<S>& flat_input, const std::vector<Eigen::Index>& query_rows,
                            const LinearForecasterParams<S>& p) {
  if (query_rows.empty()) throw Error(ErrorKind::Input, "window has no query rows");
  if (flat_input.size() != p.weight.cols())
    throw Error(ErrorKind::Shape, "forecaster expects " + std::to_string(p.weight.cols()) + " inputs, got " +
                                      std::to_string(flat_input.size()));
  const Vector<S> level = p.weight * flat_input;
  Matrix<S> out(static_cast<Eigen::Index>(query_rows.size()), p.weight.rows());
  for (std::size_t k = 0; k < query_rows.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = level.transpose() + p.bias.row(query_rows[k]);
  return out;
}

template <typename S>
void forecast_unimodal_backward(const Vector<S>& flat_input, const std::vector<Eigen::Index>& query_rows,
                                const Matrix<S>& d_forecast, LinearForecasterParams<S>& grad) {
  const Vector<S> d_level = d_forecast.colwise().sum().transpose();
  grad.weight.noalias() += d_level * flat_input.transpose();
  for (std::size_t k = 0; k < query_rows.size(); ++k)
    grad.bias.row(query_rows[k]) += d_forecast.row(static_cast<Eigen::Index>(k));
}

/// Convenience overload working directly on an aligned window.
MatrixXd forecast_unimodal(const AlignedWindow& aligned, const LinearForecasterParams<double>& p);

// ---------------------------------------------------------------------------------------------
// Mask-aware MSE

/// Mean squared error over entries where `valid` is 1.
double mse(const MatrixXd& prediction, const MatrixXd& target, const MatrixXd& valid);

// ---------------------------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  Eigen::Index length = 0;     // global resolution L
  Eigen::Index n_vars = 0;     // N
  Eigen::Index text_dim = 0;   // d
  TtfVariant ttf = TtfVariant::RecAvg;
  double sigma = 1.0;
  Eigen::Index time_dim = 8;   // d_tau
  MmfVariant mmf = MmfVariant::GrAdd;
  Eigen::Index hidden = 16;
  double kappa = 0.5;
  int heads = 1;
  /// Windows without any text skip fusion and return the numeric forecast.
  bool bypass_empty_text = true;

  bool multimodal() const { return mmf != MmfVariant::None; }
  std::string variant_name() const;
};

template <typename S>
struct PipelineParams {
  using Scalar = S;
  LinearForecasterParams<S> forecaster;
  T2vXattnParams<S> ttf;      // empty unless T2V-XAttn
  GrAddParams<S> gr_add;      // empty unless GR-Add
  XattnAddParams<S> xattn_add;  // empty unless XAttn-Add

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    nn::visit_child(self.forecaster, "forecaster", f);
    nn::visit_child(self.ttf, "ttf", f);
    nn::visit_child(self.gr_add, "mmf_gr_add", f);
    nn::visit_child(self.xattn_add, "mmf_xattn_add", f);
  }
};

template <typename S>
PipelineParams<S> init_pipeline(const PipelineConfig& cfg, std::uint64_t seed) {
  nn::Initializer init(seed);
  PipelineParams<S> p;
  p.forecaster = LinearForecasterParams<S>::init(cfg.length, cfg.n_vars, init);
  if (!cfg.multimodal()) return p;
  if (cfg.ttf == TtfVariant::T2vXattn) p.ttf = T2vXattnParams<S>::init(cfg.text_dim, cfg.time_dim, init);
  if (cfg.mmf == MmfVariant::GrAdd) p.gr_add = GrAddParams<S>::init(cfg.n_vars, cfg.text_dim, cfg.hidden, init);
  if (cfg.mmf == MmfVariant::XattnAdd) p.xattn_add = XattnAddParams<S>::init(cfg.n_vars, cfg.text_dim, init);
  return p;
}

/// Everything the pipeline needs from one window, already normalized.
struct PreparedWindow {
  std::string entity_id;
  double t_start = 0.0;
  VectorXd flat_input;                    // L(2N+1)
  std::vector<Eigen::Index> query_rows;   // grid rows holding queries
  VectorXd query_times;                   // normalized, T_f
  TextBatch<double> text;                 // normalized times
  MatrixXd targets;                       // T_f x N, z-scored
  MatrixXd valid;                         // T_f x N in {0, 1}
};

/// Aligns, expands, flattens and z-scores one window.
PreparedWindow prepare_window(const ForecastWindow& window, std::size_t length, const NormalizationStats& norm);

template <typename S>
struct PipelineCache {
  Matrix<S> forecast;  // Y_ts
  TextContext<S> context;
  T2vXattnCache<S> ttf;
  GrAddCache<S> gr_add;
  XattnAddCache<S> xattn_add;
  bool fused = false;
};

template <typename S>
TextBatch<S> cast_text(const TextBatch<double>& text) {
  return {text.embeddings.template cast<S>(), text.times.template cast<S>()};
}

template <typename S>
Matrix<S> pipeline_forward(const PipelineConfig& cfg, const PipelineParams<S>& p, const PreparedWindow& w,
                           PipelineCache<S>* cache = nullptr) {
  PipelineCache<S> local;
  auto* c = cache ? cache : &local;
  const Vector<S> flat = w.flat_input.template cast<S>();
  c->forecast = forecast_unimodal(flat, w.query_rows, p.forecaster);
  c->fused = false;
  if (!cfg.multimodal()) return c->forecast;

  const TextBatch<S> text = cast_text<S>(w.text);
  if (text.empty() && cfg.bypass_empty_text) return c->forecast;
  if (!text.empty() && text.embeddings.cols() != cfg.text_dim)
    throw Error(ErrorKind::Shape, "text dimension " + std::to_string(text.embeddings.cols()) +
                                      " does not match pipeline dimension " + std::to_string(cfg.text_dim));
  const Vector<S> queries = w.query_times.template cast<S>();
  c->context = cfg.ttf == TtfVariant::RecAvg ? recavg(text, queries, static_cast<S>(cfg.sigma), cfg.text_dim)
                                             : t2v_xattn(text, queries, p.ttf, &c->ttf);
  c->fused = true;
  if (cfg.mmf == MmfVariant::GrAdd) return gr_add(c->forecast, c->context.rows, p.gr_add, &c->gr_add);
  return xattn_add(c->forecast, c->context.rows, p.xattn_add, static_cast<S>(cfg.kappa), cfg.heads, &c->xattn_add);
}

/// Accumulates dL/dparams given dL/d(output).
template <typename S>
void pipeline_backward(const PipelineConfig& cfg, const PipelineParams<S>& p, const PreparedWindow& w,
                       const PipelineCache<S>& c, const Matrix<S>& d_out, PipelineParams<S>& grad) {
  Matrix<S> d_forecast = d_out;
  if (c.fused) {
    FusionGrads<S> g = cfg.mmf == MmfVariant::GrAdd ? gr_add_backward(p.gr_add, c.gr_add, d_out, grad.gr_add)
                                                    : xattn_add_backward(p.xattn_add, c.xattn_add, d_out, grad.xattn_add);
    d_forecast = g.d_forecast;
    if (cfg.ttf == TtfVariant::T2vXattn && !c.context.empty_text)
      t2v_xattn_backward(cast_text<S>(w.text), p.ttf, c.ttf, g.d_context, grad.ttf);
  }
  forecast_unimodal_backward(Vector<S>(w.flat_input.template cast<S>()), w.query_rows, d_forecast, grad.forecaster);
}

/// Sum of squared errors over valid entries and the matching output gradient (unscaled).
template <typename S>
S squared_error(const Matrix<S>& prediction, const PreparedWindow& w, Matrix<S>* d_prediction) {
  const Matrix<S> diff = ((prediction - w.targets.template cast<S>()).array() * w.valid.template cast<S>().array()).matrix();
  if (d_prediction) *d_prediction = S(2) * diff;
  return diff.squaredNorm();
}

struct Pipeline {
  PipelineConfig config;
  PipelineParams<double> params;
  NormalizationStats normalization;
};

/// Forecast for a raw window, in z-scored units (T_f x N, rows follow sorted query times).
MatrixXd forecast_multimodal(const ForecastWindow& window, const Pipeline& pipeline);

}  // namespace immtsf
