// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssc/model.hpp"
#include "ssc/synth.hpp"

namespace ssc::harness {

struct ExperimentConfig {
  Variant variant = Variant::ssc;
  std::filesystem::path dataset;
  std::size_t epochs = 30;
  double learning_rate = 0.001;
  double decay_factor = 0.1;
  std::size_t decay_epoch = 15;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = ".";
  std::size_t context_dim = 128;  // C_z
  std::size_t key_dim = 128;      // C'
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;
  std::size_t bodypart_dim = ctx::kBodyPartFeatures;
  std::size_t stuff_classes = ctx::kStuffCategories;
  std::size_t eval_workers = 1;

  /// Widths matched to GenConfig::benchmark(); 12 epochs, decay at 8.
  static ExperimentConfig benchmark(Variant variant);
  /// Same widths on the full 30-epoch schedule with decay at 15.
  static ExperimentConfig benchmark_long(Variant variant);

  /// Applies one "key=value" setting; keys are the field names. Unknown keys
  /// and bad values throw ConfigError.
  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> fields() const;

  std::vector<std::string> violations() const;
  /// Throws ConfigError listing every violation, including a missing dataset.
  void validate(bool require_dataset = true) const;
};

/// The four sources at the dataset's widths.
ModelConfig model_config(const ExperimentConfig& exp, const synth::GenConfig& data);
ctx::ProviderRegistry provider_registry(const synth::GenConfig& data);

struct PreparedImage {
  const synth::SynImage* image = nullptr;
  ImageTensors tensors;
  std::vector<double> targets;  // labels as 0/1 doubles
};

std::vector<PreparedImage> prepare_split(const synth::SynDataset& data, synth::Split split, const ModelConfig& config);

struct TrainResult {
  Model model;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // mean batch loss of each epoch, before that batch's step
  double seconds = 0.0;
};

/// SGD with the step-decay schedule. Batches follow a seeded shuffle each
/// epoch; a trailing batch too small for batch norm is merged into the one
/// before it. A non-finite loss or gradient aborts with the epoch index.
TrainResult train(const ExperimentConfig& exp, const synth::SynDataset& data);

/// Writes model.ssc and loss.csv into exp.output_dir.
void write_training_outputs(const ExperimentConfig& exp, const TrainResult& result);

struct ImageResult {
  std::size_t id = 0;
  std::size_t category = 0;
  std::vector<std::uint8_t> labels;
  std::optional<double> ap;  // absent when the image has no positive label
  std::vector<double> scores;
  std::vector<std::size_t> winners;  // per category, the pair holding the max
  std::vector<double> alpha;         // N × M gate, gated variants only
  synth::Tags tags;
};

struct EvalReport {
  Variant variant = Variant::ssc;
  double map = 0.0;
  std::size_t scored = 0;
  std::size_t excluded = 0;
  std::vector<std::string> sources;
  std::vector<ImageResult> images;  // id order
  std::size_t parameters = 0;
  double seconds = 0.0;
};

/// Scores every image of the split with eval-mode batch norm. Images may be
/// spread over `workers` threads; results are merged in id order.
EvalReport evaluate_map(const Model& model, const synth::SynDataset& data, synth::Split split,
                        std::size_t workers = 1);

/// Generates, trains each variant, and evaluates on the test split.
struct Comparison {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> map;  // [variant][seed]

  double mean(Variant v) const;
};

Comparison compare_variants(const synth::GenConfig& gen, const ExperimentConfig& exp,
                            const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds);

}  // namespace ssc::harness
