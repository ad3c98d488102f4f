// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/contexts.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ssc/error.hpp"
#include "ssc/numerics/ops.hpp"

namespace ssc::ctx {

using num::Graph;
using num::Tensor;

void BodyPartSet::validate() const {
  if (dim == 0) throw ShapeError("body-part feature dimension must be positive");
  if (values.size() != kBodyParts * dim) {
    throw ShapeError("body-part set must hold exactly 17 rows of " + std::to_string(dim) + " values, got " +
                     std::to_string(values.size()) + " values");
  }
}

Tensor BodyPartSet::tensor() const {
  validate();
  return Tensor::from({kBodyParts, dim}, values);
}

void GlobalFeatureMap::validate() const {
  if (height == 0 || width == 0 || depth == 0) throw ShapeError("feature map extents must be positive");
  if (values.size() != height * width * depth) throw ShapeError("feature map value count does not match H*W*D");
}

Tensor GlobalFeatureMap::tensor() const {
  validate();
  return Tensor::from({pixels(), depth}, values);
}

std::vector<std::size_t> SegmentMasks::areas() const {
  std::vector<std::size_t> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)));
  return out;
}

void SegmentMasks::validate() const {
  if (masks.empty()) throw ShapeError("segment masks: need at least one mask");
  const auto a = areas();
  for (std::size_t k = 0; k < masks.size(); ++k) {
    if (masks[k].size() != height * width) {
      throw ShapeError("segment mask " + std::to_string(k) + " does not cover " + std::to_string(height) + "x" +
                       std::to_string(width) + " pixels");
    }
    for (auto v : masks[k])
      if (v > 1) throw ShapeError("segment masks must be binary");
    if (a[k] == 0) throw ShapeError("segment mask " + std::to_string(k) + " is empty");
    if (k > 0 && a[k] > a[k - 1]) throw ShapeError("segment masks must be ordered by descending area");
  }
}

Tensor SegmentMasks::tensor() const {
  validate();
  std::vector<double> w;
  w.reserve(masks.size() * height * width);
  for (const auto& m : masks)
    for (auto v : m) w.push_back(static_cast<double>(v));
  return Tensor::from({masks.size(), height * width}, std::move(w));
}

const ProviderPayload& ContextInputs::payload(const std::string& source) const {
  for (const auto& p : providers)
    if (p.source == source) return p;
  throw Error("no payload for context source " + source);
}

void ContextBundle::add(std::string source, Tensor feature) {
  for (const auto& e : entries_)
    if (e.first == source) throw Error("duplicate context source " + source);
  if (feature.rows() != 1) throw ShapeError("context feature for " + source + " must be a single row");
  entries_.emplace_back(std::move(source), std::move(feature));
}

std::vector<Tensor> ContextBundle::features() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::size_t ContextBundle::total_dim() const {
  std::size_t d = 0;
  for (const auto& e : entries_) d += e.second.cols();
  return d;
}

std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw Error("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("top-k: non-finite score");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

Tensor ste_topk_select(Graph& g, const Tensor& scores, std::size_t k) {
  const auto chosen = topk_indices(scores.values(), k);
  auto mask = g.make_output(scores.shape(), {&scores});
  auto v = mask.mutable_values();
  for (auto i : chosen) v[i] = 1.0;
  g.record(mask, [scores](const num::Node& o) mutable {
    auto gs = scores.mutable_grad();
    for (std::size_t i = 0; i < gs.size(); ++i)
      if (o.value[i] == 1.0) gs[i] += o.grad[i];
  });
  return mask;
}

BodyPartParams BodyPartParams::create(num::ParameterSet& params, const std::string& prefix, std::size_t part_dim,
                                      std::size_t out_dim, num::Rng& rng) {
  BodyPartParams p;
  p.attention = num::Linear::create(params, prefix + ".attention", part_dim, 1, rng);
  p.fc1 = num::Linear::create(params, prefix + ".fc1", kSelectedParts * part_dim, 2 * part_dim, rng);
  p.fc2 = num::Linear::create(params, prefix + ".fc2", 2 * part_dim, out_dim, rng);
  return p;
}

BodyPartOutput bodypart_context(Graph& g, const Tensor& parts, const BodyPartParams& params) {
  if (parts.rows() != kBodyParts) {
    throw ShapeError("body-part context expects 17 part rows, got " + std::to_string(parts.rows()));
  }
  const auto d = parts.cols();
  if (params.attention.in_features() != d) throw ShapeError("body-part attention width does not match part features");

  auto scores = num::linear(g, parts, params.attention);  // 17 × 1
  auto mask = ste_topk_select(g, scores, kSelectedParts);
  auto gated = num::mul_col(g, parts, mask);
  BodyPartOutput out;
  out.selected = topk_indices(scores.values(), kSelectedParts);
  auto picked = num::gather_rows(g, gated, out.selected);
  auto flat = num::reshape(g, picked, {1, kSelectedParts * d});
  auto hidden = num::relu(g, num::linear(g, flat, params.fc1));
  out.feature = num::linear(g, hidden, params.fc2);
  return out;
}

Tensor global_average(Graph& g, const Tensor& map_pixels) {
  auto ones = Tensor::filled({1, map_pixels.rows()}, 1.0);
  return num::masked_mean(g, map_pixels, ones);
}

Tensor stuff_context(Graph& g, const Tensor& global_vec, const num::Linear& probe) {
  return num::sigmoid(g, num::linear(g, global_vec, probe));
}

Tensor surround_context(Graph& g, const Tensor& map_pixels, const Tensor& masks) {
  if (masks.cols() != map_pixels.rows()) {
    throw ShapeError("surround context: masks cover " + std::to_string(masks.cols()) + " pixels, map has " +
                     std::to_string(map_pixels.rows()));
  }
  auto per_segment = num::masked_mean(g, map_pixels, masks);
  return num::row_max_pool(g, per_segment).pooled;
}

std::vector<double> PayloadProvider::produce(std::span<const double> payload) const {
  return {payload.begin(), payload.end()};
}

std::vector<double> ConstantProvider::produce(std::span<const double>) const {
  return std::vector<double>(dim_, value_);
}

std::vector<double> SyntheticDeformationProvider::produce(std::span<const double> payload) const {
  std::vector<double> input(payload.begin(), payload.end());
  if (input.empty()) {
    num::Rng pseudo(num::sub_seed(seed_, 1));
    input.resize(64);
    for (auto& x : input) x = pseudo.bernoulli(0.1) ? 1.0 : 0.0;
  }
  num::Rng rng(num::sub_seed(seed_, 0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(input.size()));
  std::vector<double> out(dim_, 0.0);
  for (double x : input) {
    for (auto& o : out) o += scale * rng.normal() * x;
  }
  for (auto& o : out) o = std::max(o, 0.0);
  return out;
}

void ProviderRegistry::add(const std::string& source, std::shared_ptr<const ContextProvider> provider) {
  if (!provider) throw Error("null provider for " + source);
  providers_[source] = std::move(provider);
}

const ContextProvider& ProviderRegistry::get(const std::string& source) const {
  auto it = providers_.find(source);
  if (it == providers_.end()) throw Error("unknown context source: " + source);
  return *it->second;
}

std::vector<double> provider_context(const ProviderRegistry& registry, const std::string& source,
                                     std::span<const double> payload) {
  const auto& provider = registry.get(source);
  auto out = provider.produce(payload);
  if (out.size() != provider.dim()) {
    throw ShapeError("provider " + source + " declared dimension " + std::to_string(provider.dim()) + " but returned " +
                     std::to_string(out.size()) + " values");
  }
  return out;
}

}  // namespace ssc::ctx
