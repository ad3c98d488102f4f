// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssc/numerics/layers.hpp"
#include "ssc/numerics/tensor.hpp"

// Context feature constructors. Each one turns provider-supplied raw inputs
// (region features, activation maps, masks) into a single context vector;
// the SSC pipeline then treats every source alike.
namespace ssc::ctx {

inline constexpr std::size_t kBodyParts = 17;
inline constexpr std::size_t kSelectedParts = 3;
inline constexpr std::size_t kSegments = 5;
inline constexpr std::size_t kStuffCategories = 91;
inline constexpr std::size_t kBodyPartFeatures = 1024;

inline constexpr const char* kBodyPartSource = "bodypart";
inline constexpr const char* kStuffSource = "stuff";
inline constexpr const char* kSurroundSource = "surround";
inline constexpr const char* kDeformationSource = "deformation";

/// 17 × dim matrix of per-keypoint region features, row-major.
struct BodyPartSet {
  std::size_t dim = 0;
  std::vector<double> values;

  void validate() const;
  num::Tensor tensor() const;
};

/// H × W × D activations, pixel-major (the D channels of a pixel are
/// contiguous).
struct GlobalFeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::vector<double> values;

  std::size_t pixels() const { return height * width; }
  void validate() const;
  /// (H·W) × D view.
  num::Tensor tensor() const;
};

/// K binary H × W masks ordered by descending area.
struct SegmentMasks {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::vector<std::uint8_t>> masks;

  std::size_t count() const { return masks.size(); }
  std::vector<std::size_t> areas() const;
  void validate() const;
  /// K × (H·W) tensor of 0/1 weights.
  num::Tensor tensor() const;
};

struct ProviderPayload {
  std::string source;
  std::vector<double> values;
};

/// All raw context inputs for one image.
struct ContextInputs {
  BodyPartSet parts;
  GlobalFeatureMap map;
  SegmentMasks masks;
  std::vector<ProviderPayload> providers;

  const ProviderPayload& payload(const std::string& source) const;
};

/// Ordered (source name, 1 × d_i feature) list. Names are unique.
class ContextBundle {
 public:
  void add(std::string source, num::Tensor feature);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const num::Tensor& feature(std::size_t i) const { return entries_[i].second; }
  std::vector<num::Tensor> features() const;
  std::size_t total_dim() const;

 private:
  std::vector<std::pair<std::string, num::Tensor>> entries_;
};

/// Indices of the k largest scores in descending score order; ties go to
/// the lower index. Throws when k is outside [1, scores.size()].
std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k);

/// Hard top-k selection with a straight-through backward pass. The output
/// is a 0/1 mask with exactly k ones; upstream gradients pass unchanged at
/// selected positions and are exactly 0 elsewhere.
num::Tensor ste_topk_select(num::Graph& g, const num::Tensor& scores, std::size_t k);

struct BodyPartParams {
  num::Linear attention;  // d_p -> 1
  num::Linear fc1;        // 3·d_p -> 2·d_p
  num::Linear fc2;        // 2·d_p -> out

  static BodyPartParams create(num::ParameterSet& params, const std::string& prefix, std::size_t part_dim,
                               std::size_t out_dim, num::Rng& rng);
};

struct BodyPartOutput {
  num::Tensor feature;                // 1 × out
  std::vector<std::size_t> selected;  // descending score order
};

/// Scores each part, keeps the top 3 through the straight-through selector,
/// concatenates them in score order and compresses with two FC layers.
BodyPartOutput bodypart_context(num::Graph& g, const num::Tensor& parts, const BodyPartParams& params);

/// Spatial average of the map: 1 × D.
num::Tensor global_average(num::Graph& g, const num::Tensor& map_pixels);

/// Independent per-category stuff probabilities: sigmoid(x · W + b).
num::Tensor stuff_context(num::Graph& g, const num::Tensor& global_vec, const num::Linear& probe);

/// Average the activations under each mask (K × D), then max over masks.
num::Tensor surround_context(num::Graph& g, const num::Tensor& map_pixels, const num::Tensor& masks);

/// Source of an externally computed context vector of fixed dimension.
class ContextProvider {
 public:
  virtual ~ContextProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> produce(std::span<const double> payload) const = 0;
};

/// Returns the stored payload as-is.
class PayloadProvider final : public ContextProvider {
 public:
  explicit PayloadProvider(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> produce(std::span<const double> payload) const override;

 private:
  std::size_t dim_;
};

class ConstantProvider final : public ContextProvider {
 public:
  ConstantProvider(std::size_t dim, double value) : dim_(dim), value_(value) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> produce(std::span<const double>) const override;

 private:
  std::size_t dim_;
  double value_;
};

/// Stand-in for the deformation network: a fixed random projection of the
/// payload followed by ReLU, seeded so reruns agree. An empty payload
/// yields the projection of a seeded pseudo-mask.
class SyntheticDeformationProvider final : public ContextProvider {
 public:
  SyntheticDeformationProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> produce(std::span<const double> payload) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class ProviderRegistry {
 public:
  void add(const std::string& source, std::shared_ptr<const ContextProvider> provider);
  bool contains(const std::string& source) const { return providers_.count(source) != 0; }
  const ContextProvider& get(const std::string& source) const;

 private:
  std::map<std::string, std::shared_ptr<const ContextProvider>> providers_;
};

/// Runs the registered provider and checks its output against the declared
/// dimension. Throws Error("unknown context source: ...") for an
/// unregistered name.
std::vector<double> provider_context(const ProviderRegistry& registry, const std::string& source,
                                     std::span<const double> payload);

}  // namespace ssc::ctx
