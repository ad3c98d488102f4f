// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ssc/contexts.hpp"
#include "ssc/harness/experiment.hpp"
#include "ssc/harness/gradsuite.hpp"
#include "ssc/harness/metrics.hpp"
#include "ssc/harness/params.hpp"
#include "ssc/harness/report.hpp"
#include "ssc/model.hpp"
#include "ssc/numerics/ops.hpp"
#include "ssc/numerics/random.hpp"
#include "ssc/synth.hpp"
#include "test_util.hpp"

namespace {

using namespace ssc;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  std::size_t cases = 0;
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& c : harness::gradient_suite(seed)) {
      ++cases;
      ok = ok && c.passed();
      if (c.max_rel_error > worst) {
        worst = c.max_rel_error;
        worst_name = c.name;
      }
    }
  }
  const double secs = since(start);
  return {ok && secs < 60.0, std::to_string(cases) + " checks over 10 seeds, worst " + fmt("%.2e", worst) + " (" +
                                 worst_name + "), " + fmt("%.1f", secs) + " s"};
}

Outcome gate_normalization() {
  num::Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(16), m = 1 + rng.index(8), d = 1 + rng.index(32);
    const double scale = std::pow(10.0, rng.uniform(-2.0, 1.0));
    auto q = test::randn(rng, {n, d}, false);
    auto k = test::randn(rng, {m, d}, false);
    for (auto& v : q.mutable_values()) v *= scale;
    num::Graph g(num::Graph::Recording::disabled);
    const auto a = gate_from_keys(g, q, k);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < m; ++c) s += a.values()[r * m + c];
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {worst <= 1e-9, "1000 gates, max |row sum - 1| = " + fmt("%.2e", worst)};
}

Outcome ste_contract() {
  num::Rng rng(202);
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    auto s = test::randn(rng, {ctx::kBodyParts, 1});
    std::vector<double> upstream(ctx::kBodyParts);
    for (auto& u : upstream) u = rng.normal();
    num::Graph g;
    auto mask = ctx::ste_topk_select(g, s, ctx::kSelectedParts);
    const auto ones = std::count(mask.values().begin(), mask.values().end(), 1.0);
    const auto zeros = std::count(mask.values().begin(), mask.values().end(), 0.0);
    g.backward(num::sum(g, num::mul(g, mask, num::Tensor::from({ctx::kBodyParts, 1}, upstream))));
    bool ok = ones == static_cast<long>(ctx::kSelectedParts) && ones + zeros == static_cast<long>(ctx::kBodyParts);
    for (std::size_t i = 0; i < ctx::kBodyParts; ++i) {
      if (mask.values()[i] == 0.0) ok = ok && s.grad()[i] == 0.0;
      else ok = ok && s.grad()[i] == upstream[i];
    }
    bad += !ok;
  }
  return {bad == 0, "100 score vectors, " + std::to_string(bad) + " violations"};
}

Outcome mil_routing() {
  num::Rng rng(303);
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t groups = 1 + rng.index(4), n = 1 + rng.index(8), s = 1 + rng.index(10);
    auto y = test::randn(rng, {groups * n, s});
    std::vector<double> upstream(groups * s);
    for (auto& u : upstream) u = rng.uniform(0.1, 1.0) * (rng.bernoulli(0.5) ? 1 : -1);
    num::Graph g;
    auto pooled = num::group_max_pool(g, y, n);
    g.backward(num::sum(g, num::mul(g, pooled.pooled, num::Tensor::from({groups, s}, upstream))));
    bool ok = true;
    for (std::size_t b = 0; b < groups; ++b) {
      for (std::size_t c = 0; c < s; ++c) {
        const auto w = pooled.winners[b * s + c];
        for (std::size_t r = 0; r < n; ++r) {
          const double grad = y.grad()[(b * n + r) * s + c];
          ok = ok && (r == w ? grad == upstream[b * s + c] : grad == 0.0);
        }
      }
    }
    bad += !ok;
  }
  return {bad == 0, "100 score matrices, " + std::to_string(bad) + " violations"};
}

Outcome parameter_claims() {
  const auto ssc = harness::param_count(ModelConfig::desk(Variant::ssc));
  const auto fusion = harness::param_count(ModelConfig::desk(Variant::fusion));
  auto grow = [](Variant v) {
    auto c = ModelConfig::desk(v);
    c.sources.push_back({"extra", SourceKind::provider, 512});
    return harness::param_count(c);
  };
  const auto ssc5 = grow(Variant::ssc);
  const auto fusion5 = grow(Variant::fusion);
  const auto cz = ModelConfig::desk(Variant::ssc).context_dim;
  const auto h1 = ModelConfig::desk(Variant::fusion).hidden1;
  const bool ok = ssc.total() < fusion.total() && ssc5.total() - ssc.total() == 512 * cz + cz &&
                  fusion5.module("cls.fc1").weights - fusion.module("cls.fc1").weights == 512 * h1 &&
                  fusion.module("cls.fc1").weights + fusion.module("cls.fc1").biases == (256 + 2139 + 1) * h1 &&
                  ssc.module("cls.fc1").weights + ssc.module("cls.fc1").biases == (256 + 128 + 1) * h1;
  return {ok, "ssc " + std::to_string(ssc.total()) + " vs fusion " + std::to_string(fusion.total()) +
                  "; +512 context: ssc +" + std::to_string(ssc5.total() - ssc.total()) + ", fusion fc1 weights +" +
                  std::to_string(fusion5.module("cls.fc1").weights - fusion.module("cls.fc1").weights)};
}

std::string map_list(const harness::Comparison& c) {
  std::string out;
  for (std::size_t v = 0; v < c.variants.size(); ++v) {
    if (v) out += ", ";
    out += std::string(to_string(c.variants[v])) + " " + fmt("%.4f", c.mean(c.variants[v]));
  }
  return out;
}

Outcome shifted_ordering() {
  const auto start = Clock::now();
  const auto cmp = harness::compare_variants(synth::GenConfig::shifted_benchmark(),
                                             harness::ExperimentConfig::benchmark(Variant::ssc),
                                             {Variant::ssc, Variant::fusion, Variant::ho_only}, {1, 2, 3});
  const double secs = since(start);
  const double s = cmp.mean(Variant::ssc), f = cmp.mean(Variant::fusion), h = cmp.mean(Variant::ho_only);
  const bool ok = s > f && f > h && s - f >= 0.03 && secs < 300.0;
  std::string per_seed;
  for (std::size_t k = 0; k < cmp.seeds.size(); ++k) per_seed += " " + fmt("%+.4f", cmp.map[0][k] - cmp.map[1][k]);
  return {ok, map_list(cmp) + "; ssc - fusion " + fmt("%+.4f", s - f) + " (per seed" + per_seed + "), " +
                  fmt("%.1f", secs) + " s"};
}

Outcome pair_ordering() {
  const auto cmp = harness::compare_variants(synth::GenConfig::pair_benchmark(),
                                             harness::ExperimentConfig::benchmark_long(Variant::ssc),
                                             {Variant::ssc, Variant::ssc_context_only}, {1, 2, 3});
  const double s = cmp.mean(Variant::ssc), c = cmp.mean(Variant::ssc_context_only);
  return {s > c, map_list(cmp) + "; gap " + fmt("%+.4f", s - c)};
}

Outcome selection_fidelity() {
  const auto data = synth::gen_dataset(synth::GenConfig::planted_benchmark());
  const auto exp = harness::ExperimentConfig::benchmark(Variant::ssc);
  const auto model = harness::train(exp, data).model;
  const auto report = harness::evaluate_map(model, data, synth::Split::test);
  const auto sel = harness::selection_report(report, data.config.categories);
  std::size_t match = 0, total = 0;
  std::string tops;
  for (std::size_t c = 0; c < sel.size(); ++c) {
    ++total;
    if (!sel[c]) continue;
    const auto top = static_cast<std::size_t>(std::max_element(sel[c]->begin(), sel[c]->end()) - sel[c]->begin());
    const auto& planted = synth::source_names()[c % synth::source_names().size()];
    match += report.sources[top] == planted;
    tops += (tops.empty() ? "" : " ") + report.sources[top];
  }
  const double frac = static_cast<double>(match) / static_cast<double>(total);
  return {frac >= 0.8, std::to_string(match) + "/" + std::to_string(total) + " categories match (top: " + tops + ")"};
}

double oracle_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  double hits = 0, sum = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (y[order[r]]) sum += ++hits / static_cast<double>(r + 1);
  return sum / hits;
}

Outcome metric_oracle() {
  num::Rng rng(404);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t images = 1 + rng.index(60), cats = 2 + rng.index(20);
    std::vector<double> scores(images * cats);
    std::vector<std::uint8_t> labels(images * cats);
    for (auto& v : scores) v = rng.bernoulli(0.2) ? std::round(rng.uniform() * 5) / 5 : rng.uniform();
    for (auto& v : labels) v = rng.bernoulli(0.25);
    double total = 0;
    std::size_t scored = 0;
    for (std::size_t i = 0; i < images; ++i) {
      std::vector<double> s(scores.begin() + i * cats, scores.begin() + (i + 1) * cats);
      std::vector<std::uint8_t> y(labels.begin() + i * cats, labels.begin() + (i + 1) * cats);
      if (std::count(y.begin(), y.end(), 1) == 0) continue;
      total += oracle_ap(s, y);
      ++scored;
    }
    const double expect = scored ? total / static_cast<double>(scored) : 0.0;
    worst = std::max(worst, std::abs(harness::instance_map(scores, labels, cats).value - expect));
  }
  return {worst <= 1e-12, "50 cases, max deviation " + fmt("%.2e", worst)};
}

Outcome determinism() {
#ifdef SSC_CLI_PATH
  const std::filesystem::path cli = SSC_CLI_PATH;
  test::TempDir dir("acceptance_det");
  std::vector<std::string> reports;
  for (const char* run : {"a", "b"}) {
    const auto out = dir / run;
    const std::string q = "'" + out.string() + "'";
    const std::string base = "'" + cli.string() + "' ";
    const std::vector<std::string> cmds = {
        base + "gen --preset shifted --num-images 400 --seed 5 -o " + q + "/data.txt",
        base + "train --preset benchmark --variant ssc --epochs 3 --seed 5 --dataset " + q + "/data.txt --output-dir " +
            q,
        base + "eval --model " + q + "/model.ssc --dataset " + q + "/data.txt -o " + q + "/eval.csv",
    };
    for (const auto& cmd : cmds) {
      if (std::system((cmd + " >/dev/null 2>&1").c_str()) != 0) return {false, "command failed: " + cmd};
    }
    if (test::slurp(out / "data.txt") != test::slurp(dir / "a" / "data.txt")) return {false, "datasets differ"};
    if (test::slurp(out / "model.ssc") != test::slurp(dir / "a" / "model.ssc")) return {false, "models differ"};
    reports.push_back(test::slurp(out / "eval.csv"));
  }
  const bool ok = !reports[0].empty() && reports[0] == reports[1];
  return {ok, "two gen+train+eval runs, eval.csv " + std::to_string(reports[0].size()) + " bytes, " +
                  (ok ? "identical" : "different")};
#else
  return {false, "command-line tool not built"};
#endif
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-suite", gradient_suite},
      {"gate-normalization", gate_normalization},
      {"ste-contract", ste_contract},
      {"mil-routing", mil_routing},
      {"parameter-efficiency", parameter_claims},
      {"shifted-context-ordering", shifted_ordering},
      {"pair-relevance-ordering", pair_ordering},
      {"selection-fidelity", selection_fidelity},
      {"metric-oracle", metric_oracle},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
