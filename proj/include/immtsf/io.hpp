#pragma once

#include "immtsf/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace immtsf::io {

template <typename T>
struct LoadResult {
  std::vector<T> items;
  std::vector<std::string> warnings;
};

/// Epoch seconds ("1577836800", "1.5e9") or ISO-8601 ("2020-01-01", "2020-01-01T00:00:00Z",
/// "2020-01-01 12:30:00.25+02:00"). Throws Error(Parse).
double parse_timestamp(const std::string& text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

// ---------------------------------------------------------------------------------------------
// Numeric observations: long CSV `entity_id,timestamp,variable,value`

/// Groups rows by entity (sorted by id). Every series lists the dataset's variables in sorted
/// name order, so all entities share the same column layout.
LoadResult<IrregularSeries> parse_numeric(std::istream& in, const std::string& source = "<stream>");
LoadResult<IrregularSeries> load_numeric(const std::filesystem::path& path);
LoadResult<IrregularSeries> load_numeric(const std::vector<std::filesystem::path>& paths);

void write_numeric(std::ostream& out, const std::vector<IrregularSeries>& series);

// ---------------------------------------------------------------------------------------------
// Text embeddings: JSON Lines {"entity_id", "timestamp", "embedding"} or {"entity_id", "timestamp", "text"}

struct HashEmbedding {
  std::vector<double> values;
  bool empty = false;  // no tokens; values are all zero
};

/// Signed feature hashing of lowercase alphanumeric tokens into `dim` buckets, L2-normalized.
HashEmbedding hash_embed(const std::string& text, std::size_t dim, std::uint64_t seed);

struct HashEmbedder {
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  HashEmbedding operator()(const std::string& text) const { return hash_embed(text, dim, seed); }
};

/// `fallback` embeds records that carry "text" but no "embedding"; without it such records are errors.
LoadResult<TextStream> parse_text(std::istream& in, std::size_t dim, const HashEmbedder* fallback = nullptr,
                                  const std::string& source = "<stream>");
LoadResult<TextStream> load_text(const std::filesystem::path& path, std::size_t dim,
                                 const HashEmbedder* fallback = nullptr);
LoadResult<TextStream> load_text(const std::vector<std::filesystem::path>& paths, std::size_t dim,
                                 const HashEmbedder* fallback = nullptr);

void write_text(std::ostream& out, const std::vector<TextStream>& streams);

// ---------------------------------------------------------------------------------------------
// Manifest

/// "4 weeks", "24h", "86400" (seconds), or a bare number.
double parse_duration(const std::string& text);

struct ModelSettings {
  TtfVariant ttf = TtfVariant::RecAvg;
  double sigma = 1.0;
  Eigen::Index time_dim = 8;
  MmfVariant mmf = MmfVariant::GrAdd;
  double kappa = 0.5;
  Eigen::Index hidden = 16;
  int heads = 1;
  bool ttf_set = false;  // variant named explicitly in the manifest
  bool mmf_set = false;
};

struct DatasetManifest {
  std::string name;
  std::filesystem::path base_dir;
  std::string numeric_glob;
  std::string text_glob;
  TimeUnit unit = TimeUnit::Seconds;
  WindowSpec window;
  std::size_t embedding_dim = 768;
  std::optional<std::uint64_t> embedder_seed;  // enables the hash fallback for raw text
  std::optional<std::uint64_t> seed;
  ModelSettings model;
  TrainConfig train;
};

/// Context and horizon, in seconds, for the nine named benchmark datasets; nullopt for other names.
std::optional<std::pair<double, double>> default_window(const std::string& dataset);

/// A single dataset object or {"datasets": [...]}. Relative globs resolve against the manifest's directory.
std::vector<DatasetManifest> load_manifest(const std::filesystem::path& path);
std::vector<DatasetManifest> parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);

/// Files matching a glob; wildcards are allowed in the final path component only.
std::vector<std::filesystem::path> expand_glob(const std::filesystem::path& base_dir, const std::string& pattern);

struct LoadedDataset {
  Dataset dataset;
  std::vector<std::string> warnings;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------------------------
// Checkpoints

struct CheckpointMeta {
  std::string dataset;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double best_val_mse = 0.0;
};

/// Parameters are stored as name -> {"shape": [rows, cols], "values": [row-major]}.
std::string checkpoint_to_json(const Pipeline& pipeline, const CheckpointMeta& meta);
std::pair<Pipeline, CheckpointMeta> checkpoint_from_json(const std::string& json_text);

std::string read_file(const std::filesystem::path& path);

}  // namespace immtsf::io
