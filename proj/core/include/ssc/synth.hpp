// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ssc/contexts.hpp"

// Seeded synthetic benchmark: every image holds N human-object pairs of
// which exactly one carries the class signal, plus raw inputs for four
// context sources of which one ("relevant") carries class-discriminative
// signal. The rest are nuisance and, under clutter or test-time shift,
// carry the signal of some other class.
namespace ssc::synth {

enum class Split { train, test };

std::string_view to_string(Split s);

enum class Relevance {
  category,  // relevant source = category mod M
  pair,      // relevant source = (category + signature) mod M, signature drawn per image and carried by the pair
};

std::string_view to_string(Relevance r);

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t num_images = 2500;
  double test_fraction = 0.2;
  std::size_t categories = 20;  // S; the last one is "no interaction" when no_interaction_fraction > 0
  std::size_t pairs = 12;       // N
  std::size_t pair_dim = 256;   // D_ho
  std::size_t part_dim = 64;    // d_p
  std::size_t map_depth = 512;  // D
  std::size_t map_height = 7;
  std::size_t map_width = 7;
  std::size_t segments = 5;  // K
  std::size_t deformation_dim = 512;
  double signal_to_noise = 2.0;  // amplitude of the relevant context's signal
  double pair_signal = 1.0;      // amplitude of the class signal in the active pair
  double pair_noise = 1.0;
  double distractor_signal = 0.5;  // class amplitude of a distractor pair, relative to pair_signal
  double shift_fraction = 0.0;    // test images whose nuisance contexts are resampled from the shifted distribution
  double shift_scale = 2.0;       // noise scale of shifted nuisance contexts
  double clutter_fraction = 0.0;  // images (both splits) whose nuisance contexts mislead
  double rare_fraction = 0.1;     // interaction images drawn from the rare categories
  double no_interaction_fraction = 0.1;
  Relevance relevance = Relevance::category;

  /// Smaller dimensions used by the comparative benchmarks so a full
  /// train/eval cycle fits in seconds.
  static GenConfig benchmark();
  /// Half the test images see shifted, misleading nuisance contexts; a
  /// quarter of all images have misleading nuisance contexts.
  static GenConfig shifted_benchmark();
  /// Relevance follows a code carried by each pair; every nuisance source
  /// shows the class of a distractor pair that does not read it.
  static GenConfig pair_benchmark();
  /// Four categories mapped one-to-one onto the four sources, high SNR.
  static GenConfig planted_benchmark();

  std::size_t interaction_categories() const;
  std::size_t rare_categories() const;
  std::size_t no_interaction_category() const;  // == categories when absent
  std::vector<std::string> violations() const;
  /// Throws ConfigError listing every violation.
  void validate() const;

  /// Applies one "key=value" setting. Unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value);
  /// Reads "key = value" lines; '#' starts a comment.
  static GenConfig from_kv_file(const std::filesystem::path& path, GenConfig base);
  static GenConfig from_kv_file(const std::filesystem::path& path) { return from_kv_file(path, GenConfig{}); }
  std::vector<std::pair<std::string, std::string>> fields() const;
};

/// The four context sources, in bundle order.
const std::vector<std::string>& source_names();

struct Tags {
  bool small = false;
  bool rare = false;
  bool interaction = true;
  std::string relevant_context;
};

struct SynImage {
  std::size_t id = 0;
  Split split = Split::train;
  std::size_t category = 0;
  std::size_t active_pair = 0;
  std::vector<std::uint8_t> labels;  // S entries in {0, 1}
  std::vector<double> pairs;         // N × D_ho
  ctx::ContextInputs contexts;
  Tags tags;

  std::size_t positives() const;
};

struct SynDataset {
  GenConfig config;
  std::vector<SynImage> images;

  std::vector<const SynImage*> split(Split s) const;
};

/// Split is a pure function of (seed, id).
Split split_of(std::uint64_t seed, std::size_t id, double test_fraction);

SynDataset gen_dataset(const GenConfig& config);

void write_dataset(std::ostream& os, const SynDataset& data);
void save_dataset(const std::filesystem::path& path, const SynDataset& data);
/// Throws FormatError carrying the line number of the first malformed or
/// incomplete record.
SynDataset read_dataset(std::istream& is);
SynDataset load_dataset(const std::filesystem::path& path);

}  // namespace ssc::synth
