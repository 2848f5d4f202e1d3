#include "immtsf/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace immtsf {

double seconds_per(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Seconds: return 1.0;
    case TimeUnit::Minutes: return 60.0;
    case TimeUnit::Hours: return 3600.0;
    case TimeUnit::Days: return 86400.0;
    case TimeUnit::Weeks: return 604800.0;
  }
  return 1.0;
}

const char* to_string(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Seconds: return "seconds";
    case TimeUnit::Minutes: return "minutes";
    case TimeUnit::Hours: return "hours";
    case TimeUnit::Days: return "days";
    case TimeUnit::Weeks: return "weeks";
  }
  return "seconds";
}

TimeUnit parse_time_unit(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "s" || s == "sec" || s == "second" || s == "seconds") return TimeUnit::Seconds;
  if (s == "min" || s == "minute" || s == "minutes") return TimeUnit::Minutes;
  if (s == "h" || s == "hour" || s == "hours") return TimeUnit::Hours;
  if (s == "d" || s == "day" || s == "days") return TimeUnit::Days;
  if (s == "w" || s == "week" || s == "weeks") return TimeUnit::Weeks;
  throw Error(ErrorKind::Input, "unknown time unit '" + name + "'");
}

namespace {

double normalized_entropy(std::span<const double> counts, double normalizer) {
  double total = 0.0;
  for (double c : counts) total += c;
  double h = 0.0;
  for (double c : counts) {
    const double p = c / total;
    h -= p * std::log(p + kEntropyEpsilon);
  }
  return h / normalizer;
}

}  // namespace

double feature_entropy(std::span<const double> counts) {
  if (counts.size() < 2)
    throw Error(ErrorKind::UndefinedNormalizer, "feature entropy needs at least 2 features");
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw Error(ErrorKind::Input, "feature counts must be non-negative");
    total += c;
  }
  if (total <= 0.0) throw Error(ErrorKind::EmptyData, "all feature counts are zero");
  return normalized_entropy(counts, std::log(static_cast<double>(counts.size())));
}

double temporal_entropy(std::span<const double> timestamps, int bins) {
  if (bins < 2) throw Error(ErrorKind::Input, "temporal entropy needs at least 2 bins");
  if (timestamps.size() < 2) throw Error(ErrorKind::InsufficientData, "temporal entropy needs at least 2 timestamps");
  const auto [lo_it, hi_it] = std::minmax_element(timestamps.begin(), timestamps.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorKind::ZeroRange, "all timestamps are identical");

  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double span = hi - lo;
  for (double t : timestamps) {
    auto k = static_cast<long>(std::floor((t - lo) / span * bins));
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  return normalized_entropy(counts, std::log(static_cast<double>(bins)));
}

double mean_ioi(std::span<const double> timestamps, double unit_seconds) {
  if (timestamps.size() < 2) throw Error(ErrorKind::InsufficientData, "mean IOI needs at least 2 timestamps");
  if (!(unit_seconds > 0.0)) throw Error(ErrorKind::Input, "time unit must be positive");
  double sum = 0.0;
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    const double gap = timestamps[i] - timestamps[i - 1];
    if (gap < 0.0) throw Error(ErrorKind::Input, "timestamps must be sorted");
    sum += gap / unit_seconds;
  }
  return sum / static_cast<double>(timestamps.size() - 1);
}

ProfileResult profile_dataset(const std::string& name, const std::vector<EntityData>& dataset, TimeUnit unit,
                              int bins) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyData, "dataset '" + name + "' has no entities");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  ProfileResult result;
  auto& p = result.profile;
  p.dataset = name;
  p.unit = unit;
  p.bins = bins;
  p.n_entities = dataset.size();

  std::map<std::string, double> feature_counts;
  std::vector<double> all_times;
  std::set<double> unique_times;
  std::vector<double> text_times;
  double gap_sum = 0.0;
  std::size_t gap_count = 0;

  for (const auto& entity : dataset) {
    std::set<double> entity_times;
    for (const auto& var : entity.series.variables) {
      feature_counts[var.name] += static_cast<double>(var.observations.size());
      for (const auto& o : var.observations) {
        all_times.push_back(o.timestamp);
        entity_times.insert(o.timestamp);
      }
    }
    unique_times.insert(entity_times.begin(), entity_times.end());
    if (entity_times.size() >= 2) {
      const std::vector<double> sorted(entity_times.begin(), entity_times.end());
      for (std::size_t i = 1; i < sorted.size(); ++i) gap_sum += (sorted[i] - sorted[i - 1]) / seconds_per(unit);
      gap_count += sorted.size() - 1;
    }
    for (const auto& r : entity.text.records) text_times.push_back(r.timestamp);
  }

  p.n_features = feature_counts.size();
  p.n_observations = all_times.size();
  p.n_unique_timestamps = unique_times.size();
  p.n_text_entries = text_times.size();

  auto guarded = [&](const char* metric, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      result.warnings.push_back(std::string(metric) + ": " + e.what());
      return nan;
    }
  };

  std::vector<double> counts;
  for (const auto& [_, c] : feature_counts) counts.push_back(c);
  p.feature_entropy = guarded("feature_entropy", [&] { return feature_entropy(counts); });
  p.temporal_entropy = guarded("temporal_entropy", [&] { return temporal_entropy(all_times, bins); });
  p.mean_ioi = guarded("mean_ioi", [&] {
    if (gap_count == 0) throw Error(ErrorKind::InsufficientData, "no entity has 2 distinct timestamps");
    return gap_sum / static_cast<double>(gap_count);
  });
  p.text_temporal_entropy = guarded("text_temporal_entropy", [&] {
    if (text_times.empty()) throw Error(ErrorKind::EmptyData, "dataset has no text records");
    return temporal_entropy(text_times, bins);
  });
  return result;
}

namespace {

std::string format_metric(double x) {
  if (std::isnan(x)) return "NaN";
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

}  // namespace

std::string profile_csv_row(const IrregularityProfile& p) {
  std::ostringstream os;
  os << p.dataset << ',' << p.n_entities << ',' << p.n_features << ',' << p.n_unique_timestamps << ','
     << p.n_observations << ',' << format_metric(p.feature_entropy) << ',' << format_metric(p.temporal_entropy)
     << ',' << format_metric(p.mean_ioi) << ',' << to_string(p.unit) << ',' << p.n_text_entries << ','
     << format_metric(p.text_temporal_entropy);
  return os.str();
}

std::string profile_table(const std::vector<IrregularityProfile>& rows) {
  const std::vector<std::string> header = {"Dataset",   "# Entities", "# Features",   "# Unique Timestamps",
                                           "# Observations", "Feature H", "Temporal H", "Mean IOI",
                                           "# Text Entries", "Text Temporal H"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& p : rows) {
    cells.push_back({p.dataset, std::to_string(p.n_entities), std::to_string(p.n_features),
                     std::to_string(p.n_unique_timestamps), std::to_string(p.n_observations),
                     format_metric(p.feature_entropy), format_metric(p.temporal_entropy),
                     format_metric(p.mean_ioi) + " " + to_string(p.unit), std::to_string(p.n_text_entries),
                     format_metric(p.text_temporal_entropy)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      os << (c == 0 ? "" : " | ") << std::setw(static_cast<int>(width[c])) << std::left << cells[r][c];
    }
    os << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) os << (c == 0 ? "" : "-+-") << std::string(width[c], '-');
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace immtsf
