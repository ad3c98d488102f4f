// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/harness/gradsuite.hpp"

#include <functional>
#include <span>
#include <utility>

#include "ssc/contexts.hpp"
#include "ssc/model.hpp"
#include "ssc/numerics/gradcheck.hpp"
#include "ssc/numerics/layers.hpp"
#include "ssc/numerics/ops.hpp"
#include "ssc/numerics/random.hpp"

namespace ssc::harness {

using num::Graph;
using num::Rng;
using num::Shape;
using num::Tensor;

namespace {

Tensor randn(Rng& rng, Shape shape, bool requires_grad = true) {
  std::vector<double> v(num::shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

void refill(std::span<Tensor> inputs, Rng& rng) {
  for (auto& t : inputs)
    for (auto& x : t.mutable_values()) x = rng.normal();
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  // Reduces `out` to a scalar through a fixed random projection so every
  // output coordinate carries a distinct upstream gradient.
  void check(const std::string& name, std::vector<Tensor> inputs,
             const std::function<Tensor(Graph&, std::span<const Tensor>)>& f) {
    Graph probe(Graph::Recording::disabled);
    const auto out_shape = f(probe, inputs).shape();
    auto weights = harness::randn(rng_, out_shape, false);
    num::ScalarFunction scalar = [&](Graph& g, std::span<const Tensor> in) {
      return num::sum(g, num::mul(g, f(g, in), weights));
    };
    run(name, std::move(inputs), scalar);
  }

  void run(const std::string& name, std::vector<Tensor> inputs, const num::ScalarFunction& scalar,
           std::function<void(std::span<Tensor>, int)> resample = {}) {
    num::GradcheckOptions opt;
    opt.resample = resample ? std::move(resample) : [this](std::span<Tensor> in, int) { refill(in, rng_); };
    auto r = num::gradcheck(scalar, inputs, opt);
    cases_.push_back({name, r.max_rel_error, r.coordinates, r.resamples});
  }

  Tensor randn(Shape shape, bool requires_grad = true) { return harness::randn(rng_, std::move(shape), requires_grad); }
  Rng& rng() { return rng_; }
  std::vector<GradCase> take() { return std::move(cases_); }

 private:
  Rng rng_;
  std::vector<GradCase> cases_;
};

Tensor binary_masks(Rng& rng, std::size_t k, std::size_t pixels) {
  std::vector<double> v(k * pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) v[rng.index(k) * pixels + p] = 1.0;
  // every mask covers at least one pixel
  for (std::size_t m = 0; m < k && m < pixels; ++m) {
    for (std::size_t j = 0; j < k; ++j) v[j * pixels + m] = 0.0;
    v[m * pixels + m] = 1.0;
  }
  return Tensor::from({k, pixels}, std::move(v));
}

void primitives(Suite& s) {
  using In = std::span<const Tensor>;
  s.check("matmul", {s.randn({3, 4}), s.randn({4, 2})}, [](Graph& g, In in) { return num::matmul(g, in[0], in[1]); });
  s.check("matmul_transposed", {s.randn({3, 4}), s.randn({2, 4})},
          [](Graph& g, In in) { return num::matmul_transposed(g, in[0], in[1]); });
  s.check("transpose", {s.randn({3, 4})}, [](Graph& g, In in) { return num::transpose(g, in[0]); });
  s.check("add", {s.randn({3, 4}), s.randn({3, 4})}, [](Graph& g, In in) { return num::add(g, in[0], in[1]); });
  s.check("add_row", {s.randn({3, 4}), s.randn({1, 4})}, [](Graph& g, In in) { return num::add_row(g, in[0], in[1]); });
  s.check("mul", {s.randn({3, 4}), s.randn({3, 4})}, [](Graph& g, In in) { return num::mul(g, in[0], in[1]); });
  s.check("mul_col", {s.randn({3, 4}), s.randn({3, 1})}, [](Graph& g, In in) { return num::mul_col(g, in[0], in[1]); });
  s.check("scale", {s.randn({3, 4})}, [](Graph& g, In in) { return num::scale(g, in[0], -1.7); });
  s.check("concat_cols", {s.randn({3, 2}), s.randn({3, 4})},
          [](Graph& g, In in) { return num::concat_cols(g, in); });
  s.check("concat_rows", {s.randn({2, 3}), s.randn({4, 3})},
          [](Graph& g, In in) { return num::concat_rows(g, in); });
  s.check("slice_rows", {s.randn({5, 3})}, [](Graph& g, In in) { return num::slice_rows(g, in[0], 1, 3); });
  s.check("gather_rows", {s.randn({5, 3})}, [](Graph& g, In in) {
    const std::vector<std::size_t> rows = {4, 0, 4, 2};
    return num::gather_rows(g, in[0], rows);
  });
  s.check("broadcast_rows", {s.randn({1, 4})}, [](Graph& g, In in) { return num::broadcast_rows(g, in[0], 3); });
  s.check("reshape", {s.randn({3, 4})}, [](Graph& g, In in) { return num::reshape(g, in[0], {2, 6}); });
  s.check("relu", {s.randn({4, 5})}, [](Graph& g, In in) { return num::relu(g, in[0]); });
  s.check("sigmoid", {s.randn({4, 5})}, [](Graph& g, In in) { return num::sigmoid(g, in[0]); });
  s.check("softmax_rows", {s.randn({4, 5})}, [](Graph& g, In in) { return num::softmax_rows(g, in[0]); });
  s.check("row_max_pool", {s.randn({6, 3})}, [](Graph& g, In in) { return num::row_max_pool(g, in[0]).pooled; });
  s.check("group_max_pool", {s.randn({6, 3})},
          [](Graph& g, In in) { return num::group_max_pool(g, in[0], 3).pooled; });
  auto masks = binary_masks(s.rng(), 3, 8);
  s.check("masked_mean", {s.randn({8, 4})}, [masks](Graph& g, In in) { return num::masked_mean(g, in[0], masks); });
  s.check("gated_sum", {s.randn({3, 4}), s.randn({4, 5})},
          [](Graph& g, In in) { return num::gated_sum(g, in[0], in[1]); });
  s.check("sum", {s.randn({3, 4})}, [](Graph& g, In in) { return num::sum(g, in[0]); });
  s.check("mean", {s.randn({3, 4})}, [](Graph& g, In in) { return num::mean(g, in[0]); });

  // bce takes probabilities; route through a sigmoid to stay inside (0, 1).
  std::vector<double> targets(12);
  for (auto& t : targets) t = s.rng().bernoulli(0.5) ? 1.0 : 0.0;
  s.run("bce_loss", {s.randn({3, 4})}, [targets](Graph& g, In in) {
    return num::bce_loss(g, num::sigmoid(g, in[0]), targets);
  });
}

void layers(Suite& s) {
  using In = std::span<const Tensor>;
  num::ParameterSet ps;
  auto fc = num::Linear::create(ps, "fc", 5, 4, s.rng());
  s.check("linear", {s.randn({3, 5}), fc.weight, fc.bias},
          [](Graph& g, In in) { return num::linear(g, in[0], num::Linear{in[1], in[2]}); });

  auto bn = num::BatchNorm::create(ps, "bn", 4);
  for (auto& x : bn.gamma.mutable_values()) x = 1.0 + 0.3 * s.rng().normal();
  for (auto& x : bn.beta.mutable_values()) x = 0.3 * s.rng().normal();
  for (auto& x : bn.running_mean.mutable_values()) x = 0.5 * s.rng().normal();
  for (auto& x : bn.running_var.mutable_values()) x = s.rng().uniform(0.5, 2.0);
  for (auto mode : {num::BatchNormMode::train, num::BatchNormMode::eval}) {
    const auto name = mode == num::BatchNormMode::train ? "batch_norm_train" : "batch_norm_eval";
    s.check(name, {s.randn({9, 4}), bn.gamma, bn.beta}, [bn, mode](Graph& g, In in) {
      auto layer = bn;
      layer.gamma = in[1];
      layer.beta = in[2];
      // running statistics must not drift between the probes
      layer.running_mean = bn.running_mean.detach_copy();
      layer.running_var = bn.running_var.detach_copy();
      return num::batch_norm(g, in[0], layer, mode);
    });
  }
}

void contexts(Suite& s) {
  using In = std::span<const Tensor>;
  num::ParameterSet ps;
  auto bp = ctx::BodyPartParams::create(ps, "bp", 3, 4, s.rng());
  // The selection is piecewise constant and its surrogate gradient reaches
  // the parts through the scores, so the parts stay fixed here.
  auto parts = s.randn({ctx::kBodyParts, 3}, false);
  s.check("bodypart_context", {bp.fc1.weight, bp.fc1.bias, bp.fc2.weight, bp.fc2.bias},
          [bp, parts](Graph& g, In in) {
            auto p = bp;
            p.fc1 = {in[0], in[1]};
            p.fc2 = {in[2], in[3]};
            return ctx::bodypart_context(g, parts, p).feature;
          });

  auto probe = num::Linear::create(ps, "stuff", 4, 6, s.rng());
  s.check("stuff_context", {s.randn({9, 4}), probe.weight, probe.bias}, [](Graph& g, In in) {
    return ctx::stuff_context(g, ctx::global_average(g, in[0]), num::Linear{in[1], in[2]});
  });

  auto masks = binary_masks(s.rng(), ctx::kSegments, 12);
  s.check("surround_context", {s.randn({12, 4})},
          [masks](Graph& g, In in) { return ctx::surround_context(g, in[0], masks); });
}

ModelConfig tiny_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.pair_dim = 6;
  c.categories = 4;
  c.part_dim = 3;
  c.map_depth = 4;
  c.sources = {{ctx::kBodyPartSource, SourceKind::bodypart, 5},
               {ctx::kStuffSource, SourceKind::stuff, 4},
               {ctx::kSurroundSource, SourceKind::surround, 4},
               {ctx::kDeformationSource, SourceKind::provider, 3}};
  c.context_dim = 4;
  c.key_dim = 3;
  c.hidden1 = 6;
  c.hidden2 = 5;
  return c;
}

ImageTensors tiny_image(Rng& rng, const ModelConfig& c, std::size_t pairs) {
  ImageTensors t;
  t.pairs = randn(rng, {pairs, c.pair_dim}, false);
  t.parts = randn(rng, {ctx::kBodyParts, c.part_dim}, false);
  t.map_pixels = randn(rng, {9, c.map_depth}, false);
  t.masks = binary_masks(rng, ctx::kSegments, 9);
  t.provided.emplace_back(ctx::kDeformationSource, randn(rng, {1, 3}, false));
  return t;
}

void end_to_end(Suite& s, Variant variant) {
  const auto config = tiny_config(variant);
  auto model = std::make_shared<Model>(config, s.rng().next());
  constexpr std::size_t kImages = 3;
  constexpr std::size_t kPairs = 3;
  auto images = std::make_shared<std::vector<ImageTensors>>();
  std::vector<double> targets;
  for (std::size_t i = 0; i < kImages; ++i) {
    images->push_back(tiny_image(s.rng(), config, kPairs));
    for (std::size_t c = 0; c < config.categories; ++c) targets.push_back(s.rng().bernoulli(0.4) ? 1.0 : 0.0);
  }

  std::vector<Tensor> inputs;
  for (const auto& p : model->parameters().entries()) {
    if (!p.trainable() || p.name.rfind("ctx.bodypart.attention", 0) == 0) continue;
    inputs.push_back(p.tensor);
  }
  auto saved = std::make_shared<std::vector<std::vector<double>>>();
  for (const auto& p : model->parameters().entries()) {
    if (!p.trainable()) saved->emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }

  num::ScalarFunction loss = [model, images, targets, saved](Graph& g, std::span<const Tensor>) {
    // train-mode batch norm moves the running statistics; restore them so
    // every probe sees the same model
    std::size_t k = 0;
    for (const auto& p : model->parameters().entries()) {
      if (p.trainable()) continue;
      auto v = p.tensor.mutable_values();
      std::copy((*saved)[k].begin(), (*saved)[k].end(), v.begin());
      ++k;
    }
    std::vector<const ImageTensors*> batch;
    for (const auto& img : *images) batch.push_back(&img);
    auto fwd = forward_batch(g, batch, *model, num::BatchNormMode::train);
    return num::bce_loss(g, fwd.mil.scores, targets);
  };
  s.run(std::string(to_string(variant)) + "_end_to_end", std::move(inputs), loss, [images, config, &s](std::span<Tensor>, int) {
    for (auto& img : *images) img = tiny_image(s.rng(), config, kPairs);
  });
}

}  // namespace

std::vector<GradCase> gradient_suite(std::uint64_t seed) {
  Suite s(num::sub_seed(seed, 0x67726164ULL));
  primitives(s);
  layers(s);
  contexts(s);
  for (auto v : {Variant::ssc, Variant::ssc_context_only, Variant::fusion, Variant::ho_only}) end_to_end(s, v);
  return s.take();
}

}  // namespace ssc::harness
