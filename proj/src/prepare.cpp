#include "immtsf/forecaster.hpp"

#include <algorithm>
#include <cctype>

namespace immtsf {

namespace {

std::string lowercase(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

const char* to_string(TtfVariant v) { return v == TtfVariant::RecAvg ? "RecAvg" : "T2V-XAttn"; }

TtfVariant parse_ttf_variant(const std::string& name) {
  const auto s = lowercase(name);
  if (s == "recavg") return TtfVariant::RecAvg;
  if (s == "t2v-xattn" || s == "t2v_xattn" || s == "t2vxattn") return TtfVariant::T2vXattn;
  throw Error(ErrorKind::Input, "unknown TTF variant '" + name + "'");
}

const char* to_string(MmfVariant v) {
  switch (v) {
    case MmfVariant::None: return "none";
    case MmfVariant::GrAdd: return "GR-Add";
    case MmfVariant::XattnAdd: return "XAttn-Add";
  }
  return "none";
}

MmfVariant parse_mmf_variant(const std::string& name) {
  const auto s = lowercase(name);
  if (s == "none" || s == "unimodal") return MmfVariant::None;
  if (s == "gr-add" || s == "gr_add" || s == "gradd") return MmfVariant::GrAdd;
  if (s == "xattn-add" || s == "xattn_add" || s == "xattnadd") return MmfVariant::XattnAdd;
  throw Error(ErrorKind::Input, "unknown MMF variant '" + name + "'");
}

std::string PipelineConfig::variant_name() const {
  if (!multimodal()) return "unimodal";
  return std::string(to_string(ttf)) + "+" + to_string(mmf);
}

MatrixXd forecast_unimodal(const AlignedWindow& aligned, const LinearForecasterParams<double>& p) {
  std::vector<Eigen::Index> rows;
  for (auto r : aligned.query_rows()) rows.push_back(static_cast<Eigen::Index>(r));
  return forecast_unimodal<double>(flatten_rows(feature_expand(aligned)), rows, p);
}

double mse(const MatrixXd& prediction, const MatrixXd& target, const MatrixXd& valid) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols() || valid.rows() != target.rows() ||
      valid.cols() != target.cols())
    throw Error(ErrorKind::Shape, "prediction, target and mask must share a shape");
  const double count = valid.sum();
  if (count <= 0.0) throw Error(ErrorKind::UndefinedMetric, "no valid entries to score");
  return ((prediction - target).array().square() * valid.array()).sum() / count;
}

PreparedWindow prepare_window(const ForecastWindow& window, std::size_t length, const NormalizationStats& norm) {
  const std::size_t n_vars = window.past.variables.size();
  if (norm.mean.size() != n_vars) throw Error(ErrorKind::Shape, "normalization statistics do not match N");

  ForecastWindow scaled = window;
  for (std::size_t n = 0; n < n_vars; ++n) {
    for (auto& o : scaled.past.variables[n].observations) o.value = norm.normalize(n, o.value);
    for (auto& y : scaled.targets[n]) y = norm.normalize(n, y);
  }
  const AlignedWindow aligned = align(scaled, length);

  PreparedWindow w;
  w.entity_id = window.entity_id;
  w.t_start = window.t_start;
  w.flat_input = flatten_rows(feature_expand(aligned));
  for (auto r : aligned.query_rows()) w.query_rows.push_back(static_cast<Eigen::Index>(r));

  const auto times = query_times(window);
  const auto T = static_cast<Eigen::Index>(times.size());
  w.query_times.resize(T);
  for (Eigen::Index k = 0; k < T; ++k) w.query_times(k) = normalize_time(times[static_cast<std::size_t>(k)], window.t_start, window.t_end);

  w.targets = MatrixXd::Zero(T, static_cast<Eigen::Index>(n_vars));
  w.valid = MatrixXd::Zero(T, static_cast<Eigen::Index>(n_vars));
  for (std::size_t n = 0; n < n_vars; ++n) {
    for (std::size_t i = 0; i < scaled.queries[n].size(); ++i) {
      const auto it = std::lower_bound(times.begin(), times.end(), scaled.queries[n][i]);
      const auto k = static_cast<Eigen::Index>(it - times.begin());
      w.targets(k, static_cast<Eigen::Index>(n)) = scaled.targets[n][i];
      w.valid(k, static_cast<Eigen::Index>(n)) = 1.0;
    }
  }

  const auto& records = window.text_past.records;
  const auto J = static_cast<Eigen::Index>(records.size());
  const auto d = static_cast<Eigen::Index>(window.text_past.dimension());
  w.text.embeddings.resize(J, d);
  w.text.times.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto& r = records[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(r.embedding.size()) != d) throw Error(ErrorKind::Shape, "text embeddings differ in dimension");
    w.text.embeddings.row(j) = Eigen::Map<const RowVector<double>>(r.embedding.data(), d);
    w.text.times(j) = normalize_time(r.timestamp, window.t_start, window.t_end);
  }
  return w;
}

MatrixXd forecast_multimodal(const ForecastWindow& window, const Pipeline& pipeline) {
  const auto prepared = prepare_window(window, static_cast<std::size_t>(pipeline.config.length), pipeline.normalization);
  return pipeline_forward<double>(pipeline.config, pipeline.params, prepared);
}

}  // namespace immtsf
