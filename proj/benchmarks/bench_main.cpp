// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "ssc/harness/experiment.hpp"
#include "ssc/model.hpp"
#include "ssc/numerics/ops.hpp"
#include "ssc/numerics/optimizer.hpp"
#include "ssc/numerics/random.hpp"
#include "ssc/synth.hpp"

namespace {

using namespace ssc;

num::Tensor random_tensor(num::Rng& rng, num::Shape shape, bool grad) {
  std::vector<double> v(num::shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return num::Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::Rng rng(1);
  auto a = random_tensor(rng, {n, n}, false);
  auto b = random_tensor(rng, {n, n}, false);
  for (auto _ : state) {
    num::Graph g(num::Graph::Recording::disabled);
    benchmark::DoNotOptimize(num::matmul(g, a, b).values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  num::Rng rng(2);
  auto a = random_tensor(rng, {n, n}, true);
  auto b = random_tensor(rng, {n, n}, true);
  for (auto _ : state) {
    num::Graph g;
    g.backward(num::sum(g, num::matmul(g, a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(128);

void BM_SoftmaxRows(benchmark::State& state) {
  const auto cols = static_cast<std::size_t>(state.range(0));
  num::Rng rng(3);
  auto x = random_tensor(rng, {64, cols}, false);
  for (auto _ : state) {
    num::Graph g(num::Graph::Recording::disabled);
    benchmark::DoNotOptimize(num::softmax_rows(g, x).values().data());
  }
}
BENCHMARK(BM_SoftmaxRows)->Arg(4)->Arg(64)->Arg(512);

struct ForwardFixture {
  synth::SynDataset data;
  std::vector<harness::PreparedImage> images;
  Model model;

  explicit ForwardFixture(Variant v)
      : data(make_data()),
        images(harness::prepare_split(data, synth::Split::train,
                                      harness::model_config(harness::ExperimentConfig::benchmark(v), data.config))),
        model(harness::model_config(harness::ExperimentConfig::benchmark(v), data.config), 1) {}

  static synth::SynDataset make_data() {
    auto c = synth::GenConfig::benchmark();
    c.num_images = 40;
    return synth::gen_dataset(c);
  }
};

void BM_ForwardImage(benchmark::State& state) {
  const auto v = static_cast<Variant>(state.range(0));
  ForwardFixture f(v);
  std::size_t i = 0;
  for (auto _ : state) {
    num::Graph g(num::Graph::Recording::disabled);
    const ImageTensors* one[] = {&f.images[i++ % f.images.size()].tensors};
    benchmark::DoNotOptimize(forward_batch(g, one, f.model, num::BatchNormMode::eval).mil.scores.values().data());
  }
  state.SetLabel(std::string(to_string(v)));
}
BENCHMARK(BM_ForwardImage)
    ->Arg(static_cast<int>(Variant::ho_only))
    ->Arg(static_cast<int>(Variant::fusion))
    ->Arg(static_cast<int>(Variant::ssc))
    ->Arg(static_cast<int>(Variant::ssc_context_only));

void BM_TrainStep(benchmark::State& state) {
  const auto v = static_cast<Variant>(state.range(0));
  ForwardFixture f(v);
  num::OptimizerState opt;
  opt.learning_rate = 1e-6;
  std::vector<const ImageTensors*> batch;
  std::vector<double> targets;
  for (std::size_t i = 0; i < 16; ++i) {
    batch.push_back(&f.images[i].tensors);
    targets.insert(targets.end(), f.images[i].targets.begin(), f.images[i].targets.end());
  }
  for (auto _ : state) {
    num::Graph g;
    auto fwd = forward_batch(g, batch, f.model, num::BatchNormMode::train);
    auto loss = num::bce_loss(g, fwd.mil.scores, targets);
    g.backward(loss);
    num::sgd_step(f.model.parameters(), opt);
  }
  state.SetLabel(std::string(to_string(v)));
}
BENCHMARK(BM_TrainStep)->Arg(static_cast<int>(Variant::fusion))->Arg(static_cast<int>(Variant::ssc));

}  // namespace

BENCHMARK_MAIN();
