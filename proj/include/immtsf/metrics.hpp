#pragma once

#include "immtsf/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace immtsf {

inline constexpr double kEntropyEpsilon = 1e-12;
inline constexpr int kDefaultTemporalBins = 10;

enum class TimeUnit { Seconds, Minutes, Hours, Days, Weeks };

double seconds_per(TimeUnit unit);
const char* to_string(TimeUnit unit);
/// Accepts singular/plural names and short forms ("s", "min", "h", "d", "w").
TimeUnit parse_time_unit(const std::string& name);

/// Normalized Shannon entropy of the per-feature observation counts, in [0, 1].
double feature_entropy(std::span<const double> counts);

/// Normalized entropy of observation counts over `bins` equal-width bins spanning [min t, max t].
/// The last bin is closed on the right so every timestamp is counted exactly once.
double temporal_entropy(std::span<const double> timestamps, int bins = kDefaultTemporalBins);

/// Mean gap between successive sorted timestamps, expressed in units of `unit_seconds`.
double mean_ioi(std::span<const double> timestamps, double unit_seconds);

struct IrregularityProfile {
  std::string dataset;
  std::size_t n_entities = 0;
  std::size_t n_features = 0;
  std::size_t n_unique_timestamps = 0;
  std::size_t n_observations = 0;
  double feature_entropy = 0.0;
  double temporal_entropy = 0.0;
  double mean_ioi = 0.0;
  TimeUnit unit = TimeUnit::Seconds;
  int bins = kDefaultTemporalBins;
  std::size_t n_text_entries = 0;
  double text_temporal_entropy = 0.0;
};

struct ProfileResult {
  IrregularityProfile profile;
  std::vector<std::string> warnings;
};

struct EntityData {
  IrregularSeries series;
  TextStream text;
};

/// Profiles a whole dataset. Metrics that are undefined for the data become NaN and add a warning.
///
/// Features are matched by name across entities. Mean IOI pools the gaps between each entity's
/// distinct observation times and never spans two entities.
ProfileResult profile_dataset(const std::string& name, const std::vector<EntityData>& dataset, TimeUnit unit,
                              int bins = kDefaultTemporalBins);

inline const char* kProfileCsvHeader =
    "dataset,n_entities,n_features,n_unique_timestamps,n_observations,feature_entropy,temporal_entropy,"
    "mean_ioi,ioi_unit,n_text_entries,text_temporal_entropy";

std::string profile_csv_row(const IrregularityProfile& p);
std::string profile_table(const std::vector<IrregularityProfile>& rows);

}  // namespace immtsf
