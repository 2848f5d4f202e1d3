#pragma once

// Timestamp-to-text fusion: one text-context row per forecast query time, built only from
// text records whose timestamp does not exceed that query time.

#include "immtsf/nn.hpp"

#include <limits>
#include <string>

namespace immtsf {

enum class TtfVariant { RecAvg, T2vXattn };

const char* to_string(TtfVariant v);
TtfVariant parse_ttf_variant(const std::string& name);

/// Text records of one window: embeddings (J x d) and their timestamps (J), on the window's
/// normalized time axis.
template <typename S>
struct TextBatch {
  Matrix<S> embeddings;
  Vector<S> times;

  Eigen::Index size() const { return embeddings.rows(); }
  bool empty() const { return embeddings.rows() == 0; }
};

template <typename S>
struct TextContext {
  Matrix<S> rows;           // T_f x d
  bool empty_text = false;  // set when there was no text at all; rows are then zero
};

// ---------------------------------------------------------------------------------------------
// RecAvg

/// Gaussian recency weights exp(-((t_k - tau_j) / sigma)^2) over admissible texts, normalized
/// per query. Row k of the result holds the weights for query k; inadmissible entries are 0.
template <typename S>
Matrix<S> recency_weights(const Vector<S>& text_times, const Vector<S>& query_times, S sigma) {
  if (!(sigma > S(0))) throw Error(ErrorKind::Input, "RecAvg sigma must be positive");
  Matrix<S> w = Matrix<S>::Zero(query_times.size(), text_times.size());
  for (Eigen::Index k = 0; k < query_times.size(); ++k) {
    S best = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < text_times.size(); ++j) {
      if (text_times(j) > query_times(k)) continue;
      const S u = (query_times(k) - text_times(j)) / sigma;
      w(k, j) = -u * u;
      best = std::max(best, w(k, j));
    }
    if (best == -std::numeric_limits<S>::infinity()) continue;
    // shifting every log-weight by the largest one leaves the normalized weights unchanged
    S total = 0;
    for (Eigen::Index j = 0; j < text_times.size(); ++j) {
      if (text_times(j) > query_times(k)) continue;
      w(k, j) = std::exp(w(k, j) - best);
      total += w(k, j);
    }
    w.row(k) /= total;
  }
  return w;
}

template <typename S>
TextContext<S> recavg(const TextBatch<S>& text, const Vector<S>& query_times, S sigma = S(1), Eigen::Index dim = -1) {
  TextContext<S> ctx;
  if (text.empty()) {
    ctx.rows = Matrix<S>::Zero(query_times.size(), std::max<Eigen::Index>(dim, 0));
    ctx.empty_text = true;
    return ctx;
  }
  ctx.rows = recency_weights(text.times, query_times, sigma) * text.embeddings;
  return ctx;
}

/// RecAvg has no trainable parameters; the gradient flows to the embeddings only.
template <typename S>
Matrix<S> recavg_backward(const TextBatch<S>& text, const Vector<S>& query_times, S sigma, const Matrix<S>& d_rows) {
  if (text.empty()) return Matrix<S>(0, d_rows.cols());
  return recency_weights(text.times, query_times, sigma).transpose() * d_rows;
}

// ---------------------------------------------------------------------------------------------
// T2V-XAttn

template <typename S>
struct T2vXattnParams {
  using Scalar = S;
  nn::Time2VecParams<S> time;
  Vector<S> query;                   // d + d_tau, scored against [v_j ; phi(tau_j)] without scaling
  nn::DenseParams<S> projection;     // (d + d_tau) -> d

  static T2vXattnParams init(Eigen::Index dim, Eigen::Index time_dim, nn::Initializer& init) {
    T2vXattnParams p;
    p.time = nn::Time2VecParams<S>::init(time_dim, init);
    p.query.resize(dim + time_dim);
    init.uniform(p.query, dim + time_dim);
    p.projection = nn::DenseParams<S>::init(dim + time_dim, dim, init);
    return p;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    nn::visit_child(self.time, "time2vec", f);
    f("query", self.query);
    nn::visit_child(self.projection, "projection", f);
  }
};

template <typename S>
struct T2vXattnCache {
  Matrix<S> augmented;  // J x (d + d_tau)
  Matrix<S> scores;     // T_f x J attention weights, zero where inadmissible
  Matrix<S> attended;   // T_f x (d + d_tau), before projection
};

/// Attention weights over admissible texts for each query; rows of zeros where nothing is admissible.
template <typename S>
Matrix<S> masked_softmax_scores(const Vector<S>& logits, const Vector<S>& text_times, const Vector<S>& query_times) {
  Matrix<S> a = Matrix<S>::Zero(query_times.size(), logits.size());
  for (Eigen::Index k = 0; k < query_times.size(); ++k) {
    S best = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < logits.size(); ++j)
      if (text_times(j) <= query_times(k)) best = std::max(best, logits(j));
    if (best == -std::numeric_limits<S>::infinity()) continue;
    S total = 0;
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
      if (text_times(j) > query_times(k)) continue;
      a(k, j) = std::exp(logits(j) - best);
      total += a(k, j);
    }
    a.row(k) /= total;
  }
  return a;
}

/// Time-augmented attention pooling before the output projection; width d + d_tau.
template <typename S>
Matrix<S> t2v_xattn_pooled(const TextBatch<S>& text, const Vector<S>& query_times, const T2vXattnParams<S>& p,
                           T2vXattnCache<S>* cache = nullptr) {
  const Eigen::Index d = text.embeddings.cols();
  if (p.query.size() != d + p.time.dim())
    throw Error(ErrorKind::Shape, "T2V-XAttn query vector must have width d + d_tau");
  Matrix<S> augmented(text.size(), d + p.time.dim());
  augmented.leftCols(d) = text.embeddings;
  augmented.rightCols(p.time.dim()) = nn::time2vec(text.times, p.time);
  const Vector<S> logits = augmented * p.query;
  Matrix<S> scores = masked_softmax_scores(logits, text.times, query_times);
  Matrix<S> pooled = scores * augmented;
  if (cache) {
    cache->augmented = std::move(augmented);
    cache->scores = std::move(scores);
    cache->attended = pooled;
  }
  return pooled;
}

template <typename S>
TextContext<S> t2v_xattn(const TextBatch<S>& text, const Vector<S>& query_times, const T2vXattnParams<S>& p,
                         T2vXattnCache<S>* cache = nullptr) {
  TextContext<S> ctx;
  if (text.empty()) {
    ctx.rows = Matrix<S>::Zero(query_times.size(), p.projection.weight.rows());
    ctx.empty_text = true;
    return ctx;
  }
  T2vXattnCache<S> local;
  auto* c = cache ? cache : &local;
  t2v_xattn_pooled(text, query_times, p, c);
  ctx.rows = nn::dense_forward(p.projection, c->attended);
  // queries with no admissible text keep a zero context instead of the projection bias
  for (Eigen::Index k = 0; k < query_times.size(); ++k)
    if (c->scores.row(k).sum() == S(0)) ctx.rows.row(k).setZero();
  return ctx;
}

/// Accumulates parameter gradients; returns dL/d(embeddings).
template <typename S>
Matrix<S> t2v_xattn_backward(const TextBatch<S>& text, const T2vXattnParams<S>& p, const T2vXattnCache<S>& cache,
                             const Matrix<S>& d_rows, T2vXattnParams<S>& grad) {
  const Eigen::Index d = text.embeddings.cols();
  Matrix<S> d_out = d_rows;
  for (Eigen::Index k = 0; k < d_out.rows(); ++k)
    if (cache.scores.row(k).sum() == S(0)) d_out.row(k).setZero();

  const Matrix<S> d_attended = nn::dense_backward(p.projection, cache.attended, d_out, grad.projection);
  Matrix<S> d_augmented = cache.scores.transpose() * d_attended;
  // dL/d(score_kj) = d_attended_k . augmented_j, then through the masked softmax
  const Matrix<S> d_scores = d_attended * cache.augmented.transpose();
  const Matrix<S> d_logits_kj = nn::softmax_rows_backward(cache.scores, d_scores);
  const Vector<S> d_logits = d_logits_kj.colwise().sum().transpose();
  grad.query.noalias() += cache.augmented.transpose() * d_logits;
  d_augmented.noalias() += d_logits * p.query.transpose();
  nn::time2vec_backward(text.times, p.time, Matrix<S>(d_augmented.rightCols(p.time.dim())), grad.time);
  return d_augmented.leftCols(d);
}

}  // namespace immtsf
