// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/model.hpp"

#include <algorithm>
#include <set>

#include "ssc/error.hpp"
#include "ssc/numerics/ops.hpp"

namespace ssc {

using num::BatchNormMode;
using num::Graph;
using num::Tensor;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::ho_only: return "ho_only";
    case Variant::fusion: return "fusion";
    case Variant::ssc: return "ssc";
    case Variant::ssc_context_only: return "ssc_context_only";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::ho_only, Variant::fusion, Variant::ssc, Variant::ssc_context_only})
    if (to_string(v) == name) return v;
  throw ConfigError("unknown model variant '" + std::string(name) +
                    "' (expected ho_only, fusion, ssc or ssc_context_only)");
}

bool is_gated(Variant v) { return v == Variant::ssc || v == Variant::ssc_context_only; }

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::bodypart: return "bodypart";
    case SourceKind::stuff: return "stuff";
    case SourceKind::surround: return "surround";
    case SourceKind::provider: return "provider";
  }
  return "unknown";
}

SourceKind parse_source_kind(std::string_view name) {
  for (auto k : {SourceKind::bodypart, SourceKind::stuff, SourceKind::surround, SourceKind::provider})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown context source kind '" + std::string(name) + "'");
}

ModelConfig ModelConfig::desk(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.sources = {{ctx::kBodyPartSource, SourceKind::bodypart, ctx::kBodyPartFeatures},
               {ctx::kStuffSource, SourceKind::stuff, ctx::kStuffCategories},
               {ctx::kSurroundSource, SourceKind::surround, 512},
               {ctx::kDeformationSource, SourceKind::provider, 512}};
  return c;
}

std::size_t ModelConfig::context_total_dim() const {
  std::size_t d = 0;
  for (const auto& s : sources) d += s.dim;
  return d;
}

std::size_t ModelConfig::classifier_input() const {
  switch (variant) {
    case Variant::ho_only: return pair_dim;
    case Variant::fusion: return pair_dim + context_total_dim();
    case Variant::ssc:
    case Variant::ssc_context_only: return pair_dim + context_dim;
  }
  return 0;
}

bool ModelConfig::has_source_kind(SourceKind kind) const {
  return std::any_of(sources.begin(), sources.end(), [&](const auto& s) { return s.kind == kind; });
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  need(pair_dim > 0, "pair_dim must be positive");
  need(categories > 0, "categories must be positive");
  need(hidden1 > 0 && hidden2 > 0, "hidden layer widths must be positive");
  if (is_gated(variant)) {
    need(!sources.empty(), "gated variants need at least one context source");
    need(context_dim > 0, "context_dim must be positive");
    need(key_dim > 0, "key_dim must be positive");
  }
  std::set<std::string> names;
  for (const auto& s : sources) {
    need(!s.name.empty(), "context source with empty name");
    need(names.insert(s.name).second, "duplicate context source " + s.name);
    need(s.dim > 0, "context source " + s.name + " has zero dimension");
    if (s.kind == SourceKind::bodypart) need(part_dim > 0, "bodypart source needs part_dim > 0");
    if (s.kind == SourceKind::stuff || s.kind == SourceKind::surround) need(map_depth > 0, "map_depth must be positive");
    if (s.kind == SourceKind::surround) {
      need(s.dim == map_depth, "surround source dimension must equal map_depth");
    }
  }
  need(std::count_if(sources.begin(), sources.end(), [](const auto& s) { return s.kind == SourceKind::bodypart; }) <= 1,
       "at most one bodypart source");
  need(std::count_if(sources.begin(), sources.end(), [](const auto& s) { return s.kind == SourceKind::stuff; }) <= 1,
       "at most one stuff source");
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  num::Rng rng(seed);
  const auto& c = config_;
  if (c.variant != Variant::ho_only) {
    for (const auto& s : c.sources) {
      if (s.kind == SourceKind::bodypart) {
        bodypart_ = ctx::BodyPartParams::create(params_, "ctx." + s.name, c.part_dim, s.dim, rng);
      } else if (s.kind == SourceKind::stuff) {
        stuff_ = num::Linear::create(params_, "ctx." + s.name, c.map_depth, s.dim, rng);
      }
    }
  }
  if (is_gated(c.variant)) {
    for (const auto& s : c.sources) psi_.push_back(num::Linear::create(params_, "psi." + s.name, s.dim, c.context_dim, rng));
    if (c.variant == Variant::ssc) {
      theta_ = num::Linear::create(params_, "theta", c.pair_dim, c.key_dim, rng);
    } else {
      auto q = Tensor::zeros({1, c.key_dim});
      num::xavier_uniform(q, 1, c.key_dim, rng);
      query_ = params_.add("query", std::move(q), num::ParamKind::query);
    }
    phi_ = num::Linear::create(params_, "phi", c.context_dim, c.key_dim, rng);
  }
  classifier_.fc1 = num::Linear::create(params_, "cls.fc1", c.classifier_input(), c.hidden1, rng);
  classifier_.bn1 = num::BatchNorm::create(params_, "cls.bn1", c.hidden1);
  classifier_.fc2 = num::Linear::create(params_, "cls.fc2", c.hidden1, c.hidden2, rng);
  classifier_.bn2 = num::BatchNorm::create(params_, "cls.bn2", c.hidden2);
  classifier_.out = num::Linear::create(params_, "cls.out", c.hidden2, c.categories, rng);
}

ImageTensors prepare_image(std::span<const double> pair_values, std::size_t pair_count, const ctx::ContextInputs& inputs,
                           const ctx::ProviderRegistry& registry, const ModelConfig& config) {
  if (pair_count == 0) throw ShapeError("an image needs at least one human-object pair");
  if (pair_values.size() != pair_count * config.pair_dim) {
    throw ShapeError("pair features: expected " + std::to_string(pair_count) + "x" + std::to_string(config.pair_dim) +
                     " values, got " + std::to_string(pair_values.size()));
  }
  ImageTensors img;
  img.pairs = Tensor::from({pair_count, config.pair_dim}, {pair_values.begin(), pair_values.end()});
  if (config.variant == Variant::ho_only) return img;
  for (const auto& s : config.sources) {
    switch (s.kind) {
      case SourceKind::bodypart:
        if (inputs.parts.dim != config.part_dim) throw ShapeError("body-part width does not match the model");
        img.parts = inputs.parts.tensor();
        break;
      case SourceKind::stuff:
      case SourceKind::surround:
        if (!img.map_pixels.defined()) {
          if (inputs.map.depth != config.map_depth) throw ShapeError("feature map depth does not match the model");
          img.map_pixels = inputs.map.tensor();
        }
        if (s.kind == SourceKind::surround) {
          if (inputs.masks.height != inputs.map.height || inputs.masks.width != inputs.map.width) {
            throw ShapeError("segment masks and feature map differ in spatial size");
          }
          img.masks = inputs.masks.tensor();
        }
        break;
      case SourceKind::provider: {
        auto v = ctx::provider_context(registry, s.name, inputs.payload(s.name).values);
        if (v.size() != s.dim) {
          throw ShapeError("provider " + s.name + " yields " + std::to_string(v.size()) + " values, model expects " +
                           std::to_string(s.dim));
        }
        img.provided.emplace_back(s.name, Tensor::from({1, s.dim}, std::move(v)));
        break;
      }
    }
  }
  return img;
}

ctx::ContextBundle build_contexts(Graph& g, const ImageTensors& image, const Model& model) {
  ctx::ContextBundle bundle;
  for (const auto& s : model.config().sources) {
    switch (s.kind) {
      case SourceKind::bodypart:
        bundle.add(s.name, ctx::bodypart_context(g, image.parts, *model.bodypart()).feature);
        break;
      case SourceKind::stuff:
        bundle.add(s.name, ctx::stuff_context(g, ctx::global_average(g, image.map_pixels), *model.stuff_probe()));
        break;
      case SourceKind::surround:
        bundle.add(s.name, ctx::surround_context(g, image.map_pixels, image.masks));
        break;
      case SourceKind::provider: {
        auto it = std::find_if(image.provided.begin(), image.provided.end(),
                               [&](const auto& p) { return p.first == s.name; });
        if (it == image.provided.end()) throw Error("image has no prepared context for source " + s.name);
        bundle.add(s.name, it->second);
        break;
      }
    }
  }
  return bundle;
}

Tensor embed_contexts(Graph& g, const ctx::ContextBundle& bundle, const Model& model) {
  const auto& sources = model.config().sources;
  const auto& psi = model.context_embeddings();
  if (psi.empty()) throw Error("model variant " + std::string(to_string(model.config().variant)) + " has no context embeddings");
  if (bundle.size() != sources.size()) {
    throw ShapeError("bundle has " + std::to_string(bundle.size()) + " contexts, model expects " +
                     std::to_string(sources.size()));
  }
  std::vector<Tensor> rows;
  rows.reserve(bundle.size());
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    auto it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.name == bundle.name(i); });
    if (it == sources.end()) throw Error("unknown context source: " + bundle.name(i));
    const auto& map = psi[static_cast<std::size_t>(it - sources.begin())];
    if (bundle.feature(i).cols() != map.in_features()) {
      throw ShapeError("context " + bundle.name(i) + " has dimension " + std::to_string(bundle.feature(i).cols()) +
                       ", embedding expects " + std::to_string(map.in_features()));
    }
    rows.push_back(num::linear(g, bundle.feature(i), map));
  }
  return num::concat_rows(g, rows);
}

Tensor gate_from_keys(Graph& g, const Tensor& queries, const Tensor& keys) {
  return num::softmax_rows(g, num::matmul_transposed(g, queries, keys));
}

Tensor gate(Graph& g, const Tensor& pairs, const Tensor& embedded, const Model& model) {
  if (model.config().variant != Variant::ssc) throw Error("gate() needs the ssc variant");
  auto q = num::linear(g, pairs, model.pair_key());
  auto k = num::linear(g, embedded, model.context_key());
  return gate_from_keys(g, q, k);
}

Tensor context_only_gate(Graph& g, const Tensor& embedded, std::size_t pairs, const Model& model) {
  if (model.config().variant != Variant::ssc_context_only) throw Error("context_only_gate() needs the ssc_context_only variant");
  auto k = num::linear(g, embedded, model.context_key());
  auto row = gate_from_keys(g, model.query(), k);
  return num::broadcast_rows(g, row, pairs);
}

Tensor pool_context(Graph& g, const Tensor& alpha, const Tensor& embedded) { return num::gated_sum(g, alpha, embedded); }

Tensor fuse(Graph& g, const Tensor& pairs, const Tensor& pooled) {
  if (pairs.rows() != pooled.rows()) {
    throw ShapeError("fuse: " + std::to_string(pairs.rows()) + " pairs vs " + std::to_string(pooled.rows()) +
                     " pooled context rows");
  }
  const Tensor parts[] = {pairs, pooled};
  return num::concat_cols(g, parts);
}

MilScores classify_mil(Graph& g, const Tensor& features, const Classifier& c, BatchNormMode mode,
                       std::size_t pairs_per_image) {
  if (features.cols() != c.fc1.in_features()) {
    throw ShapeError("classifier expects " + std::to_string(c.fc1.in_features()) + " input features, got " +
                     std::to_string(features.cols()));
  }
  auto h = num::relu(g, num::batch_norm(g, num::linear(g, features, c.fc1), c.bn1, mode));
  h = num::relu(g, num::batch_norm(g, num::linear(g, h, c.fc2), c.bn2, mode));
  MilScores out;
  out.per_pair = num::sigmoid(g, num::linear(g, h, c.out));
  auto pooled = num::group_max_pool(g, out.per_pair, pairs_per_image);
  out.scores = pooled.pooled;
  out.winners = std::move(pooled.winners);
  return out;
}

Tensor fusion_features(Graph& g, const Tensor& pairs, const ctx::ContextBundle& bundle) {
  if (bundle.empty()) return pairs;
  auto feats = bundle.features();
  auto all = num::concat_cols(g, feats);
  const Tensor parts[] = {pairs, num::broadcast_rows(g, all, pairs.rows())};
  return num::concat_cols(g, parts);
}

MilScores fusion_baseline(Graph& g, const Tensor& pairs, const ctx::ContextBundle& bundle, const Model& model,
                          BatchNormMode mode) {
  return classify_mil(g, fusion_features(g, pairs, bundle), model.classifier(), mode, pairs.rows());
}

ImageFeatures image_features(Graph& g, const ImageTensors& image, const Model& model) {
  const auto variant = model.config().variant;
  if (image.pairs.cols() != model.config().pair_dim) throw ShapeError("pair feature width does not match the model");
  ImageFeatures out;
  if (variant == Variant::ho_only) {
    out.features = image.pairs;
    return out;
  }
  auto bundle = build_contexts(g, image, model);
  if (variant == Variant::fusion) {
    out.features = fusion_features(g, image.pairs, bundle);
    return out;
  }
  auto z = embed_contexts(g, bundle, model);
  out.alpha = variant == Variant::ssc ? gate(g, image.pairs, z, model)
                                      : context_only_gate(g, z, image.pair_count(), model);
  out.features = fuse(g, image.pairs, pool_context(g, out.alpha, z));
  return out;
}

BatchForward forward_batch(Graph& g, std::span<const ImageTensors* const> images, const Model& model,
                           BatchNormMode mode) {
  if (images.empty()) throw Error("forward_batch: empty batch");
  const auto n = images.front()->pair_count();
  BatchForward out;
  std::vector<Tensor> rows;
  rows.reserve(images.size());
  for (const auto* img : images) {
    if (img->pair_count() != n) throw ShapeError("forward_batch: images differ in pair count");
    auto f = image_features(g, *img, model);
    rows.push_back(f.features);
    if (f.alpha.defined()) out.alphas.push_back(f.alpha);
  }
  auto stacked = rows.size() == 1 ? rows.front() : num::concat_rows(g, rows);
  out.mil = classify_mil(g, stacked, model.classifier(), mode, n);
  return out;
}

}  // namespace ssc
