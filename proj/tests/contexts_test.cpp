// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssc/contexts.hpp"
#include "ssc/error.hpp"
#include "ssc/numerics/gradcheck.hpp"
#include "ssc/numerics/layers.hpp"
#include "ssc/numerics/ops.hpp"
#include "test_util.hpp"

using namespace ssc;
using namespace ssc::ctx;
using num::Graph;
using num::Rng;
using num::Tensor;
using ssc::test::randn;
using ssc::test::values;

namespace {

Tensor scores_of(std::vector<double> v) {
  const auto n = v.size();
  return Tensor::from({n, 1}, std::move(v), true);
}

// Top-k by repeated argmax, lowest index on ties.
std::vector<std::size_t> brute_topk(const std::vector<double>& s, std::size_t k) {
  std::vector<bool> used(s.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t best = s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!used[i] && (best == s.size() || s[i] > s[best])) best = i;
    used[best] = true;
    out.push_back(best);
  }
  return out;
}

void zero(const Tensor& t) {
  for (auto& v : t.mutable_values()) v = 0.0;
}

}  // namespace

TEST(TopK, DirectRanking) {
  std::vector<double> s(17, 0.0);
  s[0] = 9, s[1] = 1, s[2] = 8, s[3] = 7;
  Graph g;
  auto mask = ste_topk_select(g, scores_of(s), 3);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(mask.values()[i], (i == 0 || i == 2 || i == 3) ? 1.0 : 0.0);
  EXPECT_EQ(topk_indices(s, 3), (std::vector<std::size_t>{0, 2, 3}));
}

TEST(TopK, FullSelectionPassesEveryGradient) {
  Rng rng(1);
  auto s = randn(rng, {17, 1});
  Graph g;
  auto mask = ste_topk_select(g, s, 17);
  for (double v : mask.values()) EXPECT_EQ(v, 1.0);
  g.backward(num::sum(g, mask));
  for (double v : s.grad()) EXPECT_EQ(v, 1.0);
}

TEST(TopK, TiesBreakTowardLowerIndex) {
  const std::vector<double> s = {1.0, 2.0, 2.0, 2.0, 0.0};
  EXPECT_EQ(topk_indices(s, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(TopK, InvalidKThrows) {
  const std::vector<double> s = {1.0, 2.0};
  EXPECT_THROW(topk_indices(s, 0), Error);
  EXPECT_THROW(topk_indices(s, 3), Error);
}

TEST(Ste, ContractOverSeededScores) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = randn(rng, {17, 1});
    std::vector<double> upstream(17);
    for (auto& u : upstream) u = rng.normal();
    Graph g;
    auto mask = ste_topk_select(g, s, 3);
    const auto chosen = brute_topk(values(s), 3);
    EXPECT_EQ(std::accumulate(mask.values().begin(), mask.values().end(), 0.0), 3.0);
    g.backward(num::sum(g, num::mul(g, mask, Tensor::from({17, 1}, upstream))));
    for (std::size_t i = 0; i < 17; ++i) {
      const bool sel = std::find(chosen.begin(), chosen.end(), i) != chosen.end();
      EXPECT_EQ(mask.values()[i], sel ? 1.0 : 0.0);
      EXPECT_EQ(s.grad()[i], sel ? upstream[i] : 0.0);
    }
  }
}

TEST(Ste, SurrogateGradientDiffersFromFiniteDifferences) {
  // The forward mask is piecewise constant, so the checker must flag it.
  std::vector<Tensor> in = {scores_of({0.3, 2.0, -1.0, 0.7})};
  auto r = num::gradcheck([](Graph& g, std::span<const Tensor> x) { return num::sum(g, ste_topk_select(g, x[0], 2)); },
                          in);
  EXPECT_GT(r.max_rel_error, 0.5);
}

TEST(BodyPart, SelectionMatchesBruteForceTopThree) {
  Rng rng(3);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 6, 8, rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto parts = randn(rng, {kBodyParts, 6}, false);
    Graph g;
    auto out = bodypart_context(g, parts, p);
    std::vector<double> scores(kBodyParts);
    for (std::size_t r = 0; r < kBodyParts; ++r) {
      double s = p.attention.bias.values()[0];
      for (std::size_t c = 0; c < 6; ++c) s += parts.at(r, c) * p.attention.weight.values()[c];
      scores[r] = s;
    }
    EXPECT_EQ(out.selected, brute_topk(scores, 3));
    EXPECT_EQ(out.feature.cols(), 8u);
  }
}

TEST(BodyPart, IdenticalPartsMakeSelectionIrrelevant) {
  Rng rng(4);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 4, 5, rng);
  auto row = randn(rng, {1, 4}, false);
  std::vector<double> v;
  for (std::size_t r = 0; r < kBodyParts; ++r) v.insert(v.end(), row.values().begin(), row.values().end());
  auto parts = Tensor::from({kBodyParts, 4}, v);
  Graph g;
  const auto a = values(bodypart_context(g, parts, p).feature);
  // a different attention vector picks different indices; the output must not move
  for (auto& w : p.attention.weight.mutable_values()) w = rng.normal();
  p.attention.bias.mutable_values()[0] = 0.0;
  const auto b = values(bodypart_context(g, parts, p).feature);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(BodyPart, ZeroPartsAndBiasesGiveZero) {
  Rng rng(5);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 4, 5, rng);
  Graph g;
  for (double v : bodypart_context(g, Tensor::zeros({kBodyParts, 4}), p).feature.values()) EXPECT_EQ(v, 0.0);
}

TEST(BodyPart, PerturbingUnselectedPartsLeavesOutputUnchanged) {
  Rng rng(6);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 4, 5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto parts = randn(rng, {kBodyParts, 4}, false);
    Graph g;
    auto base = bodypart_context(g, parts, p);
    auto moved = parts.detach_copy();
    // nudge every unselected row: its score moves, but not past a selected one
    for (std::size_t r = 0; r < kBodyParts; ++r) {
      if (std::find(base.selected.begin(), base.selected.end(), r) != base.selected.end()) continue;
      for (std::size_t c = 0; c < 4; ++c) moved.mutable_values()[r * 4 + c] += 1e-9 * rng.normal();
    }
    auto after = bodypart_context(g, moved, p);
    EXPECT_EQ(after.selected, base.selected);
    EXPECT_EQ(values(after.feature), values(base.feature));
  }
}

TEST(BodyPart, WrongPartCountThrows) {
  Rng rng(7);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 4, 5, rng);
  Graph g;
  EXPECT_THROW(bodypart_context(g, Tensor::zeros({16, 4}), p), ShapeError);
  BodyPartSet set{4, std::vector<double>(16 * 4)};
  EXPECT_THROW(set.validate(), ShapeError);
}

TEST(Stuff, ZeroEverythingGivesOneHalf) {
  Rng rng(8);
  num::ParameterSet ps;
  auto probe = num::Linear::create(ps, "stuff", 6, kStuffCategories, rng);
  zero(probe.weight);
  Graph g;
  auto y = stuff_context(g, Tensor::zeros({1, 6}), probe);
  EXPECT_EQ(y.cols(), kStuffCategories);
  for (double v : y.values()) EXPECT_EQ(v, 0.5);
}

TEST(Stuff, SaturatedUnit) {
  Rng rng(9);
  num::ParameterSet ps;
  auto probe = num::Linear::create(ps, "stuff", 6, kStuffCategories, rng);
  zero(probe.weight);
  probe.bias.mutable_values()[4] = 10.0;
  Graph g;
  auto y = stuff_context(g, Tensor::zeros({1, 6}), probe);
  EXPECT_NEAR(y.values()[4], 1.0, 1e-4);
  for (std::size_t i = 0; i < kStuffCategories; ++i) {
    if (i == 4) continue;
    EXPECT_EQ(y.values()[i], 0.5);
  }
}

TEST(Stuff, MatchesMatrixVectorSigmoidOracle) {
  Rng rng(10);
  num::ParameterSet ps;
  auto probe = num::Linear::create(ps, "stuff", 6, 7, rng);
  for (auto& b : probe.bias.mutable_values()) b = rng.normal();
  auto x = randn(rng, {1, 6}, false);
  Graph g;
  auto y = stuff_context(g, x, probe);
  for (std::size_t j = 0; j < 7; ++j) {
    double z = probe.bias.values()[j];
    for (std::size_t i = 0; i < 6; ++i) z += x.values()[i] * probe.weight.at(i, j);
    const double want = 1.0 / (1.0 + std::exp(-z));
    EXPECT_NEAR(y.values()[j], want, 1e-12);
    EXPECT_GT(y.values()[j], 0.0);
    EXPECT_LT(y.values()[j], 1.0);
  }
}

TEST(Surround, ConstantFieldGivesItsValue) {
  Rng rng(11);
  std::vector<double> v;
  for (std::size_t p = 0; p < 12; ++p) v.insert(v.end(), {1.5, -2.0, 0.25});
  auto map = Tensor::from({12, 3}, v);
  std::vector<double> m(3 * 12, 0.0);
  for (std::size_t p = 0; p < 12; ++p) m[(p % 3) * 12 + p] = 1.0;
  Graph g;
  EXPECT_EQ(values(surround_context(g, map, Tensor::from({3, 12}, m))), (std::vector<double>{1.5, -2.0, 0.25}));
}

TEST(Surround, SinglePixelMaskPicksThatPixel) {
  Rng rng(12);
  auto map = randn(rng, {9, 4}, false);
  std::vector<double> m(9, 0.0);
  m[5] = 1.0;
  Graph g;
  auto y = surround_context(g, map, Tensor::from({1, 9}, m));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y.values()[c], map.at(5, c));
}

TEST(Surround, MatchesPixelLoopOracleAndIgnoresMaskOrder) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto map = randn(rng, {16, 5}, false);
    std::vector<std::vector<double>> masks(3, std::vector<double>(16, 0.0));
    for (std::size_t k = 0; k < 3; ++k) {
      masks[k][rng.index(16)] = 1.0;
      for (std::size_t p = 0; p < 16; ++p)
        if (rng.bernoulli(0.3)) masks[k][p] = 1.0;
    }
    std::vector<double> oracle(5, -INFINITY);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < 5; ++c) {
        double s = 0.0, n = 0.0;
        for (std::size_t p = 0; p < 16; ++p)
          if (masks[k][p] == 1.0) s += map.at(p, c), n += 1.0;
        oracle[c] = std::max(oracle[c], s / n);
      }
    auto flat = [](const std::vector<std::vector<double>>& ms) {
      std::vector<double> out;
      for (const auto& m : ms) out.insert(out.end(), m.begin(), m.end());
      return Tensor::from({ms.size(), 16}, out);
    };
    Graph g;
    auto y = values(surround_context(g, map, flat(masks)));
    std::reverse(masks.begin(), masks.end());
    auto z = values(surround_context(g, map, flat(masks)));
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_NEAR(y[c], oracle[c], 1e-12);
      EXPECT_EQ(y[c], z[c]);
    }
  }
}

TEST(Surround, MaskCoverageMismatchThrows) {
  Graph g;
  EXPECT_THROW(surround_context(g, Tensor::zeros({9, 2}), Tensor::filled({1, 8}, 1.0)), ShapeError);
}

TEST(Masks, ValidationRules) {
  SegmentMasks m{2, 2, {{1, 1, 0, 0}, {0, 0, 1, 0}}};
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.areas(), (std::vector<std::size_t>{2, 1}));
  SegmentMasks unordered{2, 2, {{0, 0, 1, 0}, {1, 1, 0, 0}}};
  EXPECT_THROW(unordered.validate(), ShapeError);
  SegmentMasks empty{2, 2, {{1, 1, 0, 0}, {0, 0, 0, 0}}};
  EXPECT_THROW(empty.validate(), ShapeError);
  SegmentMasks wrong{2, 2, {{1, 1, 0}}};
  EXPECT_THROW(wrong.validate(), ShapeError);
}

TEST(Providers, ConstantZerosHaveDeclaredWidth) {
  ProviderRegistry r;
  r.add("zeros", std::make_shared<ConstantProvider>(7, 0.0));
  EXPECT_EQ(provider_context(r, "zeros", {}), std::vector<double>(7, 0.0));
}

TEST(Providers, SyntheticDeformationIsReproducible) {
  SyntheticDeformationProvider a(32, 99), b(32, 99), c(32, 100);
  const std::vector<double> payload = {1.0, 0.0, 1.0, 1.0};
  EXPECT_EQ(a.produce(payload), b.produce(payload));
  EXPECT_NE(a.produce(payload), c.produce(payload));
  EXPECT_EQ(a.produce({}).size(), 32u);
  for (double v : a.produce(payload)) EXPECT_GE(v, 0.0);
}

TEST(Providers, WrongWidthIsAContractViolation) {
  ProviderRegistry r;
  r.add("deformation", std::make_shared<PayloadProvider>(512));
  EXPECT_THROW(provider_context(r, "deformation", std::vector<double>(511, 0.0)), ShapeError);
  EXPECT_NO_THROW(provider_context(r, "deformation", std::vector<double>(512, 0.0)));
  EXPECT_THROW(provider_context(r, "missing", {}), Error);
}

TEST(Bundle, RejectsDuplicatesAndMultiRowFeatures) {
  ContextBundle b;
  b.add("a", Tensor::zeros({1, 3}));
  EXPECT_THROW(b.add("a", Tensor::zeros({1, 2})), Error);
  EXPECT_THROW(b.add("b", Tensor::zeros({2, 2})), ShapeError);
  b.add("c", Tensor::zeros({1, 4}));
  EXPECT_EQ(b.total_dim(), 7u);
}

TEST(Contexts, ConstructorsAreDeterministic) {
  Rng rng(14);
  num::ParameterSet ps;
  auto p = BodyPartParams::create(ps, "bp", 4, 6, rng);
  auto probe = num::Linear::create(ps, "stuff", 5, 7, rng);
  auto parts = randn(rng, {kBodyParts, 4}, false);
  auto map = randn(rng, {9, 5}, false);
  auto masks = Tensor::filled({1, 9}, 1.0);
  Graph g1, g2;
  EXPECT_EQ(values(bodypart_context(g1, parts, p).feature), values(bodypart_context(g2, parts, p).feature));
  EXPECT_EQ(values(stuff_context(g1, global_average(g1, map), probe)),
            values(stuff_context(g2, global_average(g2, map), probe)));
  EXPECT_EQ(values(surround_context(g1, map, masks)), values(surround_context(g2, map, masks)));
}
