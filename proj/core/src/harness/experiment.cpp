// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/harness/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "ssc/error.hpp"
#include "ssc/harness/metrics.hpp"
#include "ssc/harness/params.hpp"
#include "ssc/harness/report.hpp"
#include "ssc/numerics/ops.hpp"
#include "ssc/numerics/optimizer.hpp"
#include "ssc/numerics/random.hpp"

namespace ssc::harness {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL << 16;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ExperimentConfig ExperimentConfig::benchmark(Variant variant) {
  ExperimentConfig e;
  e.variant = variant;
  e.epochs = 12;
  e.decay_epoch = 8;
  e.learning_rate = 0.05;
  e.batch_size = 16;
  e.context_dim = 32;
  e.key_dim = 32;
  e.hidden1 = 64;
  e.hidden2 = 32;
  e.bodypart_dim = 64;
  return e;
}

ExperimentConfig ExperimentConfig::benchmark_long(Variant variant) {
  auto e = benchmark(variant);
  e.epochs = 30;
  e.decay_epoch = 15;
  e.learning_rate = 0.1;
  return e;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  auto sz = [&](std::size_t& f) { f = parse_number<std::size_t>(key, value); };
  auto dbl = [&](double& f) { f = parse_number<double>(key, value); };
  if (key == "variant") variant = parse_variant(value);
  else if (key == "dataset") dataset = std::string(value);
  else if (key == "epochs") sz(epochs);
  else if (key == "learning_rate") dbl(learning_rate);
  else if (key == "decay_factor") dbl(decay_factor);
  else if (key == "decay_epoch") sz(decay_epoch);
  else if (key == "batch_size") sz(batch_size);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output_dir") output_dir = std::string(value);
  else if (key == "context_dim") sz(context_dim);
  else if (key == "key_dim") sz(key_dim);
  else if (key == "hidden1") sz(hidden1);
  else if (key == "hidden2") sz(hidden2);
  else if (key == "bodypart_dim") sz(bodypart_dim);
  else if (key == "stuff_classes") sz(stuff_classes);
  else if (key == "eval_workers") sz(eval_workers);
  else throw ConfigError("unknown experiment setting '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::fields() const {
  auto s = [](auto v) { return std::to_string(v); };
  return {{"variant", std::string(to_string(variant))},
          {"dataset", dataset.string()},
          {"epochs", s(epochs)},
          {"learning_rate", format_double(learning_rate)},
          {"decay_factor", format_double(decay_factor)},
          {"decay_epoch", s(decay_epoch)},
          {"batch_size", s(batch_size)},
          {"seed", s(seed)},
          {"output_dir", output_dir.string()},
          {"context_dim", s(context_dim)},
          {"key_dim", s(key_dim)},
          {"hidden1", s(hidden1)},
          {"hidden2", s(hidden2)},
          {"bodypart_dim", s(bodypart_dim)},
          {"stuff_classes", s(stuff_classes)},
          {"eval_workers", s(eval_workers)}};
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> out;
  auto need = [&](bool ok, const char* what) {
    if (!ok) out.emplace_back(what);
  };
  need(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning rate must be finite and >= 0");
  need(std::isfinite(decay_factor) && decay_factor >= 0.0, "decay factor must be finite and >= 0");
  need(batch_size >= 1, "batch size must be at least 1");
  need(context_dim > 0 && key_dim > 0, "context and key widths must be positive");
  need(hidden1 > 0 && hidden2 > 0, "hidden widths must be positive");
  need(bodypart_dim > 0 && stuff_classes > 0, "context widths must be positive");
  need(eval_workers >= 1, "eval workers must be at least 1");
  return out;
}

void ExperimentConfig::validate(bool require_dataset) const {
  auto v = violations();
  if (require_dataset) {
    if (dataset.empty()) {
      v.emplace_back("dataset path is required");
    } else if (!std::filesystem::exists(dataset)) {
      v.emplace_back("dataset file does not exist: " + dataset.string());
    }
  }
  if (v.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ConfigError(msg);
}

ModelConfig model_config(const ExperimentConfig& exp, const synth::GenConfig& data) {
  ModelConfig c;
  c.variant = exp.variant;
  c.pair_dim = data.pair_dim;
  c.categories = data.categories;
  c.part_dim = data.part_dim;
  c.map_depth = data.map_depth;
  c.context_dim = exp.context_dim;
  c.key_dim = exp.key_dim;
  c.hidden1 = exp.hidden1;
  c.hidden2 = exp.hidden2;
  c.sources = {{ctx::kBodyPartSource, SourceKind::bodypart, exp.bodypart_dim},
               {ctx::kStuffSource, SourceKind::stuff, exp.stuff_classes},
               {ctx::kSurroundSource, SourceKind::surround, data.map_depth},
               {ctx::kDeformationSource, SourceKind::provider, data.deformation_dim}};
  return c;
}

ctx::ProviderRegistry provider_registry(const synth::GenConfig& data) {
  ctx::ProviderRegistry r;
  r.add(ctx::kDeformationSource, std::make_shared<ctx::PayloadProvider>(data.deformation_dim));
  return r;
}

std::vector<PreparedImage> prepare_split(const synth::SynDataset& data, synth::Split split, const ModelConfig& config) {
  const auto registry = provider_registry(data.config);
  std::vector<PreparedImage> out;
  for (const auto* img : data.split(split)) {
    PreparedImage p;
    p.image = img;
    p.tensors = prepare_image(img->pairs, data.config.pairs, img->contexts, registry, config);
    p.targets.assign(img->labels.begin(), img->labels.end());
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size,
                                                   std::size_t pairs) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const auto end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() * pairs < num::kMinBatchNormRows) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

num::Tensor batch_loss(num::Graph& g, const std::vector<PreparedImage>& images, const std::vector<std::size_t>& batch,
                       const Model& model) {
  std::vector<const ImageTensors*> ptrs;
  std::vector<double> targets;
  for (auto i : batch) {
    ptrs.push_back(&images[i].tensors);
    targets.insert(targets.end(), images[i].targets.begin(), images[i].targets.end());
  }
  auto fwd = forward_batch(g, ptrs, model, num::BatchNormMode::train);
  return num::bce_loss(g, fwd.mil.scores, targets);
}

}  // namespace

TrainResult train(const ExperimentConfig& exp, const synth::SynDataset& data) {
  const auto start = std::chrono::steady_clock::now();
  exp.validate(false);
  const auto config = model_config(exp, data.config);
  TrainResult result{Model(config, exp.seed), 0.0, {}, 0.0};
  auto& model = result.model;
  const auto images = prepare_split(data, synth::Split::train, config);
  if (images.empty()) throw Error("training split is empty");
  if (images.size() * data.config.pairs < num::kMinBatchNormRows) {
    throw Error("training split has fewer pair rows than batch norm needs");
  }

  std::vector<std::size_t> identity(images.size());
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  // Initial loss in train mode over the unshuffled split; running statistics
  // are restored afterwards so training starts from the initialization.
  {
    std::vector<std::vector<double>> saved;
    for (const auto& p : model.parameters().entries())
      if (p.kind == num::ParamKind::bn_running) saved.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    double total = 0.0;
    const auto batches = make_batches(identity, exp.batch_size, data.config.pairs);
    for (const auto& b : batches) {
      num::Graph g(num::Graph::Recording::disabled);
      total += batch_loss(g, images, b, model).item();
    }
    result.initial_loss = total / static_cast<double>(batches.size());
    std::size_t k = 0;
    for (auto& p : model.parameters().entries()) {
      if (p.kind != num::ParamKind::bn_running) continue;
      std::copy(saved[k].begin(), saved[k].end(), p.tensor.mutable_values().begin());
      ++k;
    }
  }

  num::OptimizerState opt;
  opt.learning_rate = exp.learning_rate;
  opt.decay_factor = exp.decay_factor;
  opt.decay_epoch = exp.decay_epoch;
  opt.validate();
  for (std::size_t epoch = 0; epoch < exp.epochs; ++epoch) {
    opt.epoch = epoch;
    auto order = identity;
    num::Rng rng(num::sub_seed(exp.seed, kShuffleStream + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    const auto batches = make_batches(std::move(order), exp.batch_size, data.config.pairs);
    for (const auto& b : batches) {
      try {
        num::Graph g;
        auto loss = batch_loss(g, images, b, model);
        if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
        total += loss.item();
        g.backward(loss);
        num::sgd_step(model.parameters(), opt);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches.size()));
  }
  result.seconds = seconds_since(start);
  return result;
}

void write_training_outputs(const ExperimentConfig& exp, const TrainResult& result) {
  std::filesystem::create_directories(exp.output_dir);
  save_model(exp.output_dir / "model.ssc", result.model);
  std::ofstream os(exp.output_dir / "loss.csv");
  if (!os) throw Error("cannot write " + (exp.output_dir / "loss.csv").string());
  num::OptimizerState opt;
  opt.learning_rate = exp.learning_rate;
  opt.decay_factor = exp.decay_factor;
  opt.decay_epoch = exp.decay_epoch;
  os << "epoch,loss,learning_rate\n";
  os << "initial," << format_number(result.initial_loss) << ",\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    opt.epoch = e;
    os << e << ',' << format_number(result.epoch_loss[e]) << ',' << format_number(opt.rate()) << '\n';
  }
  if (!os) throw Error("failed writing loss.csv");
}

namespace {

ImageResult evaluate_image(const Model& model, const PreparedImage& p) {
  num::Graph g(num::Graph::Recording::disabled);
  const ImageTensors* ptrs[] = {&p.tensors};
  auto fwd = forward_batch(g, ptrs, model, num::BatchNormMode::eval);
  ImageResult r;
  r.id = p.image->id;
  r.category = p.image->category;
  r.tags = p.image->tags;
  r.labels = p.image->labels;
  r.scores.assign(fwd.mil.scores.values().begin(), fwd.mil.scores.values().end());
  r.winners = fwd.mil.winners;
  if (!fwd.alphas.empty()) r.alpha.assign(fwd.alphas[0].values().begin(), fwd.alphas[0].values().end());
  r.ap = average_precision(r.scores, p.image->labels);
  return r;
}

}  // namespace

EvalReport evaluate_map(const Model& model, const synth::SynDataset& data, synth::Split split, std::size_t workers) {
  const auto start = std::chrono::steady_clock::now();
  const auto& mc = model.config();
  if (mc.pair_dim != data.config.pair_dim || mc.categories != data.config.categories) {
    throw ShapeError("model and dataset disagree on pair width or category count");
  }
  const auto images = prepare_split(data, split, mc);
  EvalReport report;
  report.variant = mc.variant;
  for (const auto& s : mc.sources) report.sources.push_back(s.name);
  report.images.resize(images.size());
  workers = std::max<std::size_t>(1, std::min(workers, images.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < images.size(); ++i) report.images[i] = evaluate_image(model, images[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < images.size(); i += workers) report.images[i] = evaluate_image(model, images[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  double total = 0.0;
  for (const auto& r : report.images) {
    if (!r.ap) {
      ++report.excluded;
      continue;
    }
    total += *r.ap;
    ++report.scored;
  }
  if (report.scored) report.map = total / static_cast<double>(report.scored);
  report.parameters = param_count(model).total();
  report.seconds = seconds_since(start);
  return report;
}

double Comparison::mean(Variant v) const {
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (variants[i] != v) continue;
    return std::accumulate(map[i].begin(), map[i].end(), 0.0) / static_cast<double>(map[i].size());
  }
  throw Error("variant " + std::string(to_string(v)) + " was not compared");
}

Comparison compare_variants(const synth::GenConfig& gen, const ExperimentConfig& exp,
                            const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds) {
  Comparison out;
  out.variants = variants;
  out.seeds = seeds;
  out.map.assign(variants.size(), {});
  for (auto seed : seeds) {
    auto g = gen;
    g.seed = seed;
    const auto data = synth::gen_dataset(g);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      auto e = exp;
      e.variant = variants[v];
      e.seed = seed;
      const auto trained = train(e, data);
      out.map[v].push_back(evaluate_map(trained.model, data, synth::Split::test, exp.eval_workers).map);
    }
  }
  return out;
}

}  // namespace ssc::harness
