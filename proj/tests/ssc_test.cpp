// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "ssc/contexts.hpp"
#include "ssc/error.hpp"
#include "ssc/model.hpp"
#include "ssc/numerics/gradcheck.hpp"
#include "ssc/numerics/ops.hpp"
#include "test_util.hpp"

using namespace ssc;
using num::BatchNormMode;
using num::Graph;
using num::Rng;
using num::Tensor;
using ssc::test::randn;
using ssc::test::values;

namespace {

std::vector<SourceSpec> toy_sources() {
  return {{ctx::kBodyPartSource, SourceKind::bodypart, 5},
          {ctx::kStuffSource, SourceKind::stuff, 4},
          {ctx::kSurroundSource, SourceKind::surround, 4},
          {ctx::kDeformationSource, SourceKind::provider, 3}};
}

ModelConfig toy_config(Variant v, std::vector<SourceSpec> sources = toy_sources()) {
  ModelConfig c;
  c.variant = v;
  c.pair_dim = 6;
  c.categories = 5;
  c.part_dim = 3;
  c.map_depth = 4;
  c.sources = std::move(sources);
  c.context_dim = 4;
  c.key_dim = 3;
  c.hidden1 = 7;
  c.hidden2 = 5;
  return c;
}

ImageTensors toy_image(Rng& rng, std::size_t pairs, std::size_t deformation = 3) {
  ImageTensors t;
  t.pairs = randn(rng, {pairs, 6}, false);
  t.parts = randn(rng, {ctx::kBodyParts, 3}, false);
  t.map_pixels = randn(rng, {9, 4}, false);
  std::vector<double> m(ctx::kSegments * 9, 0.0);
  for (std::size_t p = 0; p < 9; ++p) m[(p % ctx::kSegments) * 9 + p] = 1.0;
  t.masks = Tensor::from({ctx::kSegments, 9}, m);
  t.provided.emplace_back(ctx::kDeformationSource, randn(rng, {1, deformation}, false));
  return t;
}

// Copies every parameter of `from` into `to` by name.
void copy_parameters(const Model& from, Model& to) {
  for (auto& p : to.parameters().entries()) {
    const auto& src = from.parameters().get(p.name);
    std::copy(src.values().begin(), src.values().end(), p.tensor.mutable_values().begin());
  }
}

ctx::ContextBundle random_bundle(Rng& rng, const std::vector<std::size_t>& dims) {
  ctx::ContextBundle b;
  for (std::size_t i = 0; i < dims.size(); ++i) b.add("c" + std::to_string(i), randn(rng, {1, dims[i]}, false));
  return b;
}

ModelConfig provider_config(Variant v, const std::vector<std::size_t>& dims) {
  std::vector<SourceSpec> s;
  for (std::size_t i = 0; i < dims.size(); ++i) s.push_back({"c" + std::to_string(i), SourceKind::provider, dims[i]});
  return toy_config(v, s);
}

}  // namespace

TEST(Embed, ZeroContextsGiveZero) {
  Model m(provider_config(Variant::ssc, {3, 5}), 1);
  ctx::ContextBundle b;
  b.add("c0", Tensor::zeros({1, 3}));
  b.add("c1", Tensor::zeros({1, 5}));
  Graph g;
  auto z = embed_contexts(g, b, m);
  EXPECT_EQ(z.rows(), 2u);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Embed, IdentityMapReturnsTheInput) {
  Model m(provider_config(Variant::ssc, {4}), 2);
  const auto& w = m.context_embeddings()[0].weight;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) w.mutable_values()[i * 4 + j] = i == j ? 1.0 : 0.0;
  ctx::ContextBundle b;
  b.add("c0", Tensor::from({1, 4}, {0.5, -1.0, 2.0, 3.0}));
  Graph g;
  EXPECT_EQ(values(embed_contexts(g, b, m)), (std::vector<double>{0.5, -1.0, 2.0, 3.0}));
}

TEST(Embed, MatchesPerRowLoopOracle) {
  Rng rng(3);
  const std::vector<std::size_t> dims = {3, 5, 2};
  Model m(provider_config(Variant::ssc, dims), 3);
  for (const auto& l : m.context_embeddings())
    for (auto& v : l.bias.mutable_values()) v = rng.normal();
  auto b = random_bundle(rng, dims);
  Graph g;
  auto z = embed_contexts(g, b, m);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& l = m.context_embeddings()[i];
    for (std::size_t j = 0; j < 4; ++j) {
      double s = l.bias.values()[j];
      for (std::size_t k = 0; k < dims[i]; ++k) s += b.feature(i).values()[k] * l.weight.at(k, j);
      EXPECT_NEAR(z.at(i, j), s, 1e-12);
    }
  }
}

TEST(Embed, WrongWidthThrows) {
  Model m(provider_config(Variant::ssc, {3}), 4);
  ctx::ContextBundle b;
  b.add("c0", Tensor::zeros({1, 4}));
  Graph g;
  EXPECT_THROW(embed_contexts(g, b, m), ShapeError);
}

TEST(Gate, ClosedForm) {
  Graph g;
  auto a = gate_from_keys(g, Tensor::from({1, 1}, {1.0}), Tensor::from({2, 1}, {std::log(3.0), 0.0}));
  EXPECT_NEAR(a.at(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(a.at(0, 1), 0.25, 1e-15);
}

TEST(Gate, SingleContextIsAllOnes) {
  Rng rng(5);
  Model m(provider_config(Variant::ssc, {3}), 5);
  Graph g;
  auto a = gate(g, randn(rng, {4, 6}, false), randn(rng, {1, 4}, false), m);
  EXPECT_EQ(a.rows(), 4u);
  for (double v : a.values()) EXPECT_EQ(v, 1.0);
}

TEST(Gate, IdenticalKeysGiveUniformRows) {
  Rng rng(6);
  Model m(provider_config(Variant::ssc, {3, 3, 3}), 6);
  auto row = randn(rng, {1, 4}, false);
  std::vector<double> z;
  for (int i = 0; i < 3; ++i) z.insert(z.end(), row.values().begin(), row.values().end());
  Graph g;
  auto a = gate(g, randn(rng, {5, 6}, false), Tensor::from({3, 4}, z), m);
  for (double v : a.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Gate, RowsAreDistributions) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(6), mm = 1 + rng.index(5), k = 1 + rng.index(4);
    Graph g;
    auto q = randn(rng, {n, k}, false);
    auto keys = randn(rng, {mm, k}, false);
    for (auto& v : keys.mutable_values()) v *= 5.0;
    auto a = gate_from_keys(g, q, keys);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < mm; ++c) {
        EXPECT_GE(a.at(r, c), 0.0);
        s += a.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Gate, WrongVariantThrows) {
  Model m(provider_config(Variant::ssc_context_only, {3}), 8);
  Graph g;
  EXPECT_THROW(gate(g, Tensor::zeros({2, 6}), Tensor::zeros({1, 4}), m), Error);
}

TEST(ContextOnlyGate, RowsAreIdenticalAndMatchOracle) {
  Rng rng(9);
  Model m(provider_config(Variant::ssc_context_only, {3, 2, 4}), 9);
  auto z = randn(rng, {3, 4}, false);
  Graph g;
  auto a = context_only_gate(g, z, 5, m);
  ASSERT_EQ(a.rows(), 5u);
  const auto& phi = m.context_key();
  std::vector<double> logits(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double key = phi.bias.values()[j];
      for (std::size_t c = 0; c < 4; ++c) key += z.at(i, c) * phi.weight.at(c, j);
      logits[i] += m.query().values()[j] * key;
    }
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a.at(r, i), a.at(0, i));
      EXPECT_NEAR(a.at(r, i), std::exp(logits[i]) / denom, 1e-12);
    }
}

TEST(ContextOnlyGate, SingleContextIsAllOnes) {
  Rng rng(10);
  Model m(provider_config(Variant::ssc_context_only, {3}), 10);
  Graph g;
  for (double v : context_only_gate(g, randn(rng, {1, 4}, false), 3, m).values()) EXPECT_EQ(v, 1.0);
}

TEST(Pool, AveragesTwoContexts) {
  Graph g;
  auto p = pool_context(g, Tensor::from({1, 2}, {0.5, 0.5}), Tensor::from({2, 2}, {2, 0, 0, 2}));
  EXPECT_EQ(values(p), (std::vector<double>{1, 1}));
}

TEST(Pool, OneHotSelectsThatContext) {
  Rng rng(11);
  auto z = randn(rng, {3, 4}, false);
  Graph g;
  auto p = pool_context(g, Tensor::from({1, 3}, {0, 1, 0}), z);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(p.values()[c], z.at(1, c));
}

TEST(Pool, MatchesMatmulOracle) {
  Rng rng(12);
  auto alpha = randn(rng, {4, 3}, false);
  auto z = randn(rng, {3, 5}, false);
  Graph g;
  auto p = pool_context(g, alpha, z);
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) s += alpha.at(j, i) * z.at(i, c);
      EXPECT_NEAR(p.at(j, c), s, 1e-12);
    }
}

TEST(Fuse, ConcatenatesPairAndContext) {
  Graph g;
  EXPECT_EQ(values(fuse(g, Tensor::from({1, 2}, {1, 2}), Tensor::from({1, 1}, {3}))), (std::vector<double>{1, 2, 3}));
  auto f = fuse(g, Tensor::filled({2, 3}, 1.0), Tensor::zeros({2, 2}));
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(f.at(r, 3), 0.0);
    EXPECT_EQ(f.at(r, 4), 0.0);
  }
  EXPECT_THROW(fuse(g, Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
}

TEST(Fuse, Gradcheck) {
  Rng rng(13);
  std::vector<Tensor> in = {randn(rng, {3, 2}), randn(rng, {3, 4})};
  auto w = randn(rng, {3, 6}, false);
  auto r = num::gradcheck(
      [&](Graph& g, std::span<const Tensor> x) { return num::sum(g, num::mul(g, fuse(g, x[0], x[1]), w)); }, in);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Classify, SinglePairIsItsOwnScore) {
  Rng rng(14);
  Model m(toy_config(Variant::ho_only), 14);
  auto x = randn(rng, {1, 6}, false);
  Graph g;
  auto s = classify_mil(g, x, m.classifier(), BatchNormMode::eval, 1);
  EXPECT_EQ(values(s.scores), values(s.per_pair));
}

TEST(Classify, DuplicatePairsDoNotChangeScores) {
  Rng rng(15);
  Model m(toy_config(Variant::ho_only), 15);
  auto x = randn(rng, {1, 6}, false);
  std::vector<double> two(x.values().begin(), x.values().end());
  two.insert(two.end(), x.values().begin(), x.values().end());
  Graph g;
  auto a = classify_mil(g, x, m.classifier(), BatchNormMode::eval, 1);
  auto b = classify_mil(g, Tensor::from({2, 6}, two), m.classifier(), BatchNormMode::eval, 2);
  EXPECT_EQ(values(a.scores), values(b.scores));
}

TEST(Classify, MatchesLayerByLayerOracle) {
  Rng rng(16);
  Model m(toy_config(Variant::ho_only), 16);
  const auto& c = m.classifier();
  for (const auto* bn : {&c.bn1, &c.bn2}) {
    for (auto& v : bn->running_mean.mutable_values()) v = 0.3 * rng.normal();
    for (auto& v : bn->running_var.mutable_values()) v = rng.uniform(0.5, 2.0);
    for (auto& v : bn->gamma.mutable_values()) v = 1.0 + 0.2 * rng.normal();
    for (auto& v : bn->beta.mutable_values()) v = 0.2 * rng.normal();
  }
  auto x = randn(rng, {4, 6}, false);
  Graph g;
  auto s = classify_mil(g, x, c, BatchNormMode::eval, 4);

  auto dense = [](const std::vector<double>& in, const num::Linear& l) {
    std::vector<double> out(l.out_features());
    for (std::size_t j = 0; j < out.size(); ++j) {
      double v = l.bias.values()[j];
      for (std::size_t i = 0; i < in.size(); ++i) v += in[i] * l.weight.at(i, j);
      out[j] = v;
    }
    return out;
  };
  auto norm_relu = [](std::vector<double> v, const num::BatchNorm& bn) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = (v[j] - bn.running_mean.values()[j]) / std::sqrt(bn.running_var.values()[j] + bn.epsilon) *
                 bn.gamma.values()[j] +
             bn.beta.values()[j];
      v[j] = std::max(v[j], 0.0);
    }
    return v;
  };
  std::vector<double> best(5, -1.0);
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> row(x.values().begin() + r * 6, x.values().begin() + (r + 1) * 6);
    auto h = norm_relu(dense(row, c.fc1), c.bn1);
    h = norm_relu(dense(h, c.fc2), c.bn2);
    auto o = dense(h, c.out);
    for (std::size_t k = 0; k < 5; ++k) best[k] = std::max(best[k], 1.0 / (1.0 + std::exp(-o[k])));
  }
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(s.scores.values()[k], best[k], 1e-10);
}

TEST(Classify, GradientReachesOnlyWinnerPairs) {
  Rng rng(17);
  Model m(toy_config(Variant::ho_only), 17);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = randn(rng, {6, 6});
    Graph g;
    auto s = classify_mil(g, x, m.classifier(), BatchNormMode::eval, 6);
    g.backward(num::sum(g, s.scores));
    std::vector<bool> winner(6, false);
    for (auto w : s.winners) winner[w] = true;
    for (std::size_t r = 0; r < 6; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < 6; ++c) any = any || x.grad()[r * 6 + c] != 0.0;
      EXPECT_TRUE(winner[r] || !any) << "row " << r;
    }
  }
}

TEST(Fusion, WidthIsPairPlusEveryContext) {
  auto desk = ModelConfig::desk(Variant::fusion);
  EXPECT_EQ(desk.classifier_input(), 2395u);
  EXPECT_EQ(ModelConfig::desk(Variant::ssc).classifier_input(), 256u + 128u);
  Rng rng(18);
  auto b = random_bundle(rng, {3, 5, 2});
  Graph g;
  auto f = fusion_features(g, randn(rng, {4, 6}, false), b);
  EXPECT_EQ(f.cols(), 6u + 10u);
  EXPECT_EQ(f.rows(), 4u);
}

TEST(Fusion, NoContextsIsPairOnly) {
  Rng rng(19);
  Model fusion(toy_config(Variant::fusion, {}), 19);
  Model ho(toy_config(Variant::ho_only, {}), 19);
  auto x = randn(rng, {3, 6}, false);
  Graph g;
  auto a = fusion_baseline(g, x, ctx::ContextBundle{}, fusion);
  auto b = classify_mil(g, x, ho.classifier(), BatchNormMode::eval, 3);
  EXPECT_EQ(values(a.scores), values(b.scores));
}

TEST(Ssc, PermutingContextsPermutesAlphaAndKeepsScores) {
  Rng rng(20);
  auto sources = toy_sources();
  Model a(toy_config(Variant::ssc, sources), 20);
  std::vector<SourceSpec> shuffled = {sources[2], sources[0], sources[3], sources[1]};
  Model b(toy_config(Variant::ssc, shuffled), 99);
  copy_parameters(a, b);
  for (int trial = 0; trial < 10; ++trial) {
    auto img = toy_image(rng, 3);
    Graph g;
    auto fa = image_features(g, img, a);
    auto fb = image_features(g, img, b);
    const std::size_t perm[] = {2, 0, 3, 1};
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(fb.alpha.at(r, j), fa.alpha.at(r, perm[j]), 1e-12);
    auto sa = classify_mil(g, fa.features, a.classifier(), BatchNormMode::eval, 3);
    auto sb = classify_mil(g, fb.features, b.classifier(), BatchNormMode::eval, 3);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(sa.scores.values()[k], sb.scores.values()[k], 1e-9);
  }
}

TEST(Ssc, OneHotGateIsSingleContextConcatenation) {
  Rng rng(21);
  Model m(provider_config(Variant::ssc, {3, 2}), 21);
  auto b = random_bundle(rng, {3, 2});
  auto pairs = randn(rng, {2, 6}, false);
  Graph g;
  auto z = embed_contexts(g, b, m);
  auto fused = fuse(g, pairs, pool_context(g, Tensor::from({2, 2}, {0, 1, 0, 1}), z));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(fused.at(r, 6 + c), z.at(1, c));
}

TEST(Ssc, EndToEndGradcheckOnTwoPairThreeContextToy) {
  Rng rng(22);
  std::vector<SourceSpec> three = {{ctx::kStuffSource, SourceKind::stuff, 4},
                                   {ctx::kSurroundSource, SourceKind::surround, 4},
                                   {ctx::kDeformationSource, SourceKind::provider, 3}};
  for (auto v : {Variant::ssc, Variant::ssc_context_only}) {
    Model m(toy_config(v, three), 22);
    auto img = toy_image(rng, 2);
    std::vector<double> targets = {1, 0, 0, 1, 0};
    std::vector<Tensor> in;
    for (const auto& p : m.parameters().entries())
      if (p.trainable()) in.push_back(p.tensor);
    auto r = num::gradcheck(
        [&](Graph& g, std::span<const Tensor>) {
          const ImageTensors* batch[] = {&img};
          auto f = forward_batch(g, batch, m, BatchNormMode::eval);
          return num::bce_loss(g, f.mil.scores, targets);
        },
        in);
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(v);
  }
}

TEST(Ssc, ClassifierWidthIndependentOfContexts) {
  auto small = provider_config(Variant::ssc, {3});
  auto large = provider_config(Variant::ssc, {3, 500, 1000});
  EXPECT_EQ(small.classifier_input(), large.classifier_input());
  auto fs = provider_config(Variant::fusion, {3});
  auto fl = provider_config(Variant::fusion, {3, 500, 1000});
  EXPECT_EQ(fl.classifier_input() - fs.classifier_input(), 1500u);
}

TEST(Config, ViolationsAreListed) {
  auto c = toy_config(Variant::ssc);
  c.sources[2].dim = 9;  // surround must match map depth
  c.sources.push_back(c.sources[0]);
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("surround"), std::string::npos);
    EXPECT_NE(msg.find("duplicate"), std::string::npos);
  }
  EXPECT_THROW(Model(toy_config(Variant::ssc, {}), 1), ConfigError);
  EXPECT_THROW(parse_variant("nope"), ConfigError);
  EXPECT_EQ(parse_variant("ssc_context_only"), Variant::ssc_context_only);
}

TEST(ModelIo, RoundTripIsExact) {
  test::TempDir dir("model_io");
  Rng rng(23);
  for (auto v : {Variant::ho_only, Variant::fusion, Variant::ssc, Variant::ssc_context_only}) {
    Model m(toy_config(v), 23);
    for (auto& p : m.parameters().entries())
      for (auto& x : p.tensor.mutable_values()) x = rng.normal() * 1e3 + 1e-17;
    const auto path = dir / ("m_" + std::string(to_string(v)) + ".ssc");
    save_model(path, m);
    auto back = load_model(path);
    EXPECT_EQ(back.config().variant, v);
    EXPECT_EQ(back.config().sources.size(), m.config().sources.size());
    ASSERT_EQ(back.parameters().entries().size(), m.parameters().entries().size());
    for (std::size_t i = 0; i < m.parameters().entries().size(); ++i) {
      const auto& a = m.parameters().entries()[i];
      const auto& b = back.parameters().entries()[i];
      EXPECT_EQ(a.name, b.name);
      EXPECT_EQ(values(a.tensor), values(b.tensor));
    }
    save_model(dir / "again.ssc", back);
    EXPECT_EQ(test::slurp(path), test::slurp(dir / "again.ssc"));
  }
}

TEST(ModelIo, CorruptFilesAreRejected) {
  test::TempDir dir("model_bad");
  Model m(toy_config(Variant::ssc), 24);
  save_model(dir / "m.ssc", m);
  const auto full = test::slurp(dir / "m.ssc");
  {
    std::ofstream os(dir / "trunc.ssc", std::ios::binary);
    os << full.substr(0, full.size() - 9);
  }
  EXPECT_THROW(load_model(dir / "trunc.ssc"), Error);
  {
    std::ofstream os(dir / "magic.ssc", std::ios::binary);
    os << "not-a-model\n" << full;
  }
  EXPECT_THROW(load_model(dir / "magic.ssc"), Error);
  EXPECT_THROW(load_model(dir / "missing.ssc"), Error);
}
