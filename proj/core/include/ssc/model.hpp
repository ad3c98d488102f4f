// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssc/contexts.hpp"
#include "ssc/numerics/layers.hpp"
#include "ssc/numerics/tensor.hpp"

namespace ssc {

enum class Variant { ho_only, fusion, ssc, ssc_context_only };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
bool is_gated(Variant v);

enum class SourceKind { bodypart, stuff, surround, provider };

std::string_view to_string(SourceKind k);
SourceKind parse_source_kind(std::string_view name);

/// One context source: how it is built and the width of its feature.
struct SourceSpec {
  std::string name;
  SourceKind kind = SourceKind::provider;
  std::size_t dim = 0;
};

struct ModelConfig {
  Variant variant = Variant::ssc;
  std::size_t pair_dim = 256;   // D_ho
  std::size_t categories = 20;  // S
  std::size_t part_dim = 64;    // body-part region feature width
  std::size_t map_depth = 512;  // global-layer channels
  std::vector<SourceSpec> sources;
  std::size_t context_dim = 128;  // C_z, width of the embedded contexts
  std::size_t key_dim = 128;      // C', width of the gating space
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 256;

  /// The four standard sources at desk dimensions: body-part 1024, stuff 91,
  /// surround 512, deformation 512; D_ho 256; C_z = C' = 128; 512/256
  /// hidden units; 20 categories.
  static ModelConfig desk(Variant variant);

  std::size_t context_total_dim() const;
  std::size_t classifier_input() const;
  bool has_source_kind(SourceKind kind) const;
  /// Throws ConfigError listing every violation.
  void validate() const;
};

/// Two hidden layers (Linear, BatchNorm, ReLU) and a sigmoid output.
struct Classifier {
  num::Linear fc1;
  num::BatchNorm bn1;
  num::Linear fc2;
  num::BatchNorm bn2;
  num::Linear out;
};

/// All learnable state of one model variant. Tensors are shared handles, so
/// a Model is move-only.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  num::ParameterSet& parameters() { return params_; }
  const num::ParameterSet& parameters() const { return params_; }

  const std::optional<ctx::BodyPartParams>& bodypart() const { return bodypart_; }
  const std::optional<num::Linear>& stuff_probe() const { return stuff_; }
  /// Per-source context embedding g_psi, in source order.
  const std::vector<num::Linear>& context_embeddings() const { return psi_; }
  const num::Linear& pair_key() const { return theta_; }     // g_theta
  const num::Linear& context_key() const { return phi_; }    // g_phi
  const num::Tensor& query() const { return query_; }        // context-only variant
  const Classifier& classifier() const { return classifier_; }

 private:
  ModelConfig config_;
  num::ParameterSet params_;
  std::optional<ctx::BodyPartParams> bodypart_;
  std::optional<num::Linear> stuff_;
  std::vector<num::Linear> psi_;
  num::Linear theta_;
  num::Linear phi_;
  num::Tensor query_;
  Classifier classifier_;
};

/// Leaf tensors for one image, prepared once and reused across epochs.
struct ImageTensors {
  num::Tensor pairs;       // N × D_ho
  num::Tensor parts;       // 17 × d_p
  num::Tensor map_pixels;  // (H·W) × D
  num::Tensor masks;       // K × (H·W)
  std::vector<std::pair<std::string, num::Tensor>> provided;  // 1 × d per provider source

  std::size_t pair_count() const { return pairs.rows(); }
};

ImageTensors prepare_image(std::span<const double> pair_values, std::size_t pair_count, const ctx::ContextInputs& inputs,
                           const ctx::ProviderRegistry& registry, const ModelConfig& config);

/// Runs every source constructor of the model on one image, in source order.
ctx::ContextBundle build_contexts(num::Graph& g, const ImageTensors& image, const Model& model);

/// Z_c: row i is g_psi^i applied to context i. M × C_z.
num::Tensor embed_contexts(num::Graph& g, const ctx::ContextBundle& bundle, const Model& model);

/// softmax over rows of Q · Kᵀ.
num::Tensor gate_from_keys(num::Graph& g, const num::Tensor& queries, const num::Tensor& keys);

/// alpha = softmax(g_theta(pairs) · g_phi(Z_c)ᵀ), N × M.
num::Tensor gate(num::Graph& g, const num::Tensor& pairs, const num::Tensor& embedded, const Model& model);

/// Context-only ablation: a learned query replaces g_theta(pairs); every
/// row of the N × M result is identical.
num::Tensor context_only_gate(num::Graph& g, const num::Tensor& embedded, std::size_t pairs, const Model& model);

/// x'_c: row j is Σ_i alpha[j,i] · Z_c[i]. N × C_z.
num::Tensor pool_context(num::Graph& g, const num::Tensor& alpha, const num::Tensor& embedded);

/// Row j = [x_ho^j, pooled_j]. N × (D_ho + C_z).
num::Tensor fuse(num::Graph& g, const num::Tensor& pairs, const num::Tensor& pooled);

struct MilScores {
  num::Tensor per_pair;  // rows × S sigmoid outputs
  num::Tensor scores;    // images × S, max over each image's pairs
  std::vector<std::size_t> winners;  // images × S, winning pair per category
};

/// Per-pair classifier followed by a max over each block of
/// `pairs_per_image` rows.
MilScores classify_mil(num::Graph& g, const num::Tensor& features, const Classifier& classifier,
                       num::BatchNormMode mode, std::size_t pairs_per_image);

/// Each pair row concatenated with every raw context vector.
num::Tensor fusion_features(num::Graph& g, const num::Tensor& pairs, const ctx::ContextBundle& bundle);

/// Fusion baseline for one image: fusion_features, classify, max over pairs.
MilScores fusion_baseline(num::Graph& g, const num::Tensor& pairs, const ctx::ContextBundle& bundle, const Model& model,
                          num::BatchNormMode mode = num::BatchNormMode::eval);

struct ImageFeatures {
  num::Tensor features;  // N × classifier_input
  num::Tensor alpha;     // N × M, gated variants only
};

/// Classifier input for one image under the model's variant.
ImageFeatures image_features(num::Graph& g, const ImageTensors& image, const Model& model);

struct BatchForward {
  MilScores mil;
  std::vector<num::Tensor> alphas;  // per image, gated variants only
};

/// Forward pass for a batch of images that share the pair count N. In train
/// mode batch-norm statistics are taken over all B·N pair rows.
BatchForward forward_batch(num::Graph& g, std::span<const ImageTensors* const> images, const Model& model,
                           num::BatchNormMode mode);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace ssc
