#pragma once

#include "immtsf/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace immtsf {

enum class SynthKind { Uniform, Bursty, TextInformative };

const char* to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& name);

inline constexpr double kSynthEpoch = 1577836800.0;  // 2020-01-01T00:00:00Z

struct SynthSpec {
  SynthKind kind = SynthKind::TextInformative;
  std::size_t n_entities = 2;
  std::size_t n_variables = 1;
  double context = 86400.0;
  double horizon = 86400.0;
  double noise_std = 0.1;
  std::uint64_t seed = 7;
  std::size_t dim = 4;
  std::size_t periods = 160;                  // text-informative length, in horizons
  std::size_t observations_per_entity = 400;  // uniform and bursty length

  void validate() const;
};

/// The text-informative construction, per entity: every text record at `tau` encodes
/// `next_value / scale` in its first embedding component before noise is added.
struct SynthTruth {
  struct Link {
    double tau = 0.0;
    double next_time = 0.0;
    double next_value = 0.0;
  };
  double scale = 1.0;
  std::vector<std::vector<Link>> links;  // per entity
};

struct SynthDataset {
  std::vector<IrregularSeries> series;
  std::vector<TextStream> text;
  SynthTruth truth;
};

/// Deterministic in (spec, seed).
///
/// uniform: a regular grid of step horizon/8, each point kept with probability 0.7.
/// bursty: alternating quiet and burst states with exponential dwell times; burst gaps are 10x shorter.
/// text-informative: per-horizon AR(1) levels observed at jittered slots, with one text record shortly
/// before each horizon boundary that announces the first value observed after it.
SynthDataset generate_synth(const SynthSpec& spec);

/// Writes numeric.csv, text.jsonl, manifest.json and truth.json into `dir`.
void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthDataset& data);

}  // namespace immtsf
