// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssc/error.hpp"
#include "ssc/harness/experiment.hpp"
#include "ssc/harness/gradsuite.hpp"
#include "ssc/harness/params.hpp"
#include "ssc/harness/report.hpp"
#include "ssc/model.hpp"
#include "ssc/synth.hpp"

namespace fs = std::filesystem;
using namespace ssc;

namespace {

constexpr const char* kOutputEnv = "SSC_OUTPUT_DIR";

fs::path default_output_dir() {
  const char* env = std::getenv(kOutputEnv);
  return env && *env ? fs::path(env) : fs::path(".");
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// One string option per config field; only the flags actually given are
// applied, on top of whatever preset or file the config started from.
class FieldFlags {
 public:
  FieldFlags(CLI::App* app, const std::vector<std::pair<std::string, std::string>>& fields,
             const std::vector<std::string>& skip = {}) {
    for (const auto& [key, def] : fields) {
      if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
      auto names = "--" + dashed(key);
      if (dashed(key) != key) names += ",--" + key;
      auto* opt = app->add_option(names, values_[key], "default " + (def.empty() ? std::string("none") : def));
      opts_.emplace_back(key, opt);
    }
  }

  template <typename Config>
  void apply(Config& c) const {
    for (const auto& [key, opt] : opts_)
      if (opt->count() > 0) c.set(key, values_.at(key));
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> opts_;
};

synth::Split parse_split(const std::string& s) {
  if (s == "train") return synth::Split::train;
  if (s == "test") return synth::Split::test;
  throw ConfigError("split must be 'train' or 'test', got '" + s + "'");
}

synth::GenConfig gen_preset(const std::string& name) {
  if (name == "default") return {};
  if (name == "benchmark") return synth::GenConfig::benchmark();
  if (name == "shifted") return synth::GenConfig::shifted_benchmark();
  if (name == "pair") return synth::GenConfig::pair_benchmark();
  if (name == "planted") return synth::GenConfig::planted_benchmark();
  throw ConfigError("unknown generator preset '" + name + "'");
}

harness::ExperimentConfig exp_preset(const std::string& name) {
  if (name == "desk") return {};
  if (name == "benchmark") return harness::ExperimentConfig::benchmark(Variant::ssc);
  if (name == "benchmark_long") return harness::ExperimentConfig::benchmark_long(Variant::ssc);
  throw ConfigError("unknown experiment preset '" + name + "'");
}

struct GenArgs {
  std::string preset = "default";
  std::string config;
  std::string output;
};

int run_gen(const GenArgs& a, const FieldFlags& flags) {
  auto cfg = gen_preset(a.preset);
  if (!a.config.empty()) cfg = synth::GenConfig::from_kv_file(a.config, cfg);
  flags.apply(cfg);
  cfg.validate();
  const fs::path out = a.output.empty() ? default_output_dir() / "dataset.txt" : fs::path(a.output);
  const auto data = synth::gen_dataset(cfg);
  synth::save_dataset(out, data);
  std::cout << "wrote " << data.images.size() << " images (train " << data.split(synth::Split::train).size()
            << ", test " << data.split(synth::Split::test).size() << ") to " << out.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string preset = "desk";
};

int run_train(const TrainArgs& a, const FieldFlags& flags) {
  auto exp = exp_preset(a.preset);
  exp.output_dir = default_output_dir();
  flags.apply(exp);
  exp.validate();
  const auto data = synth::load_dataset(exp.dataset);
  const auto result = harness::train(exp, data);
  harness::write_training_outputs(exp, result);
  std::cout << "initial loss " << harness::format_number(result.initial_loss);
  if (!result.epoch_loss.empty()) std::cout << ", final epoch loss " << harness::format_number(result.epoch_loss.back());
  std::cout << "\nwrote " << (exp.output_dir / "model.ssc").string() << " and " << (exp.output_dir / "loss.csv").string()
            << '\n';
  std::cerr << "train: " << result.seconds << " s\n";
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string dataset;
  std::string split = "test";
  std::size_t workers = 1;
  std::string output;
};

int run_eval(const EvalArgs& a) {
  const fs::path model_path = a.model.empty() ? default_output_dir() / "model.ssc" : fs::path(a.model);
  const auto model = load_model(model_path);
  const auto data = synth::load_dataset(a.dataset);
  const auto report = harness::evaluate_map(model, data, parse_split(a.split), a.workers);
  const fs::path out = a.output.empty() ? default_output_dir() / "eval.csv" : fs::path(a.output);
  harness::write_csv(out, harness::eval_rows(report, data.config.categories));
  std::cout << to_string(report.variant) << " map " << harness::format_number(report.map) << " over " << report.scored
            << " images (" << report.excluded << " excluded)\nwrote " << out.string() << '\n';
  std::cerr << "eval: " << report.seconds << " s\n";
  return 0;
}

struct GradArgs {
  std::size_t seeds = 10;
  std::uint64_t first_seed = 1;
};

int run_gradcheck(const GradArgs& a) {
  if (a.seeds == 0) throw ConfigError("at least one seed is required");
  std::vector<harness::GradCase> worst;
  for (std::size_t i = 0; i < a.seeds; ++i) {
    auto cases = harness::gradient_suite(a.first_seed + i);
    if (worst.empty()) {
      worst = std::move(cases);
      continue;
    }
    for (std::size_t k = 0; k < cases.size(); ++k) {
      worst[k].max_rel_error = std::max(worst[k].max_rel_error, cases[k].max_rel_error);
      worst[k].resamples += cases[k].resamples;
    }
  }
  bool ok = true;
  for (const auto& c : worst) {
    std::printf("%-30s %.3e %6zu %s\n", c.name.c_str(), c.max_rel_error, c.coordinates, c.passed() ? "ok" : "FAIL");
    ok = ok && c.passed();
  }
  std::printf("%zu cases over %zu seeds, tolerance %.0e: %s\n", worst.size(), a.seeds, harness::kGradTolerance,
              ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

struct ParamArgs {
  std::vector<std::string> variants;
  std::string preset = "desk";
  std::size_t extra_context = 0;
  std::string output;
};

int run_params(const ParamArgs& a) {
  std::vector<Variant> variants;
  for (const auto& v : a.variants) variants.push_back(parse_variant(v));
  if (variants.empty()) variants = {Variant::ho_only, Variant::fusion, Variant::ssc, Variant::ssc_context_only};
  std::vector<harness::CsvRow> rows;
  for (auto v : variants) {
    ModelConfig c;
    if (a.preset == "desk") c = ModelConfig::desk(v);
    else if (a.preset == "benchmark") c = model_config(harness::ExperimentConfig::benchmark(v), synth::GenConfig::benchmark());
    else throw ConfigError("unknown parameter preset '" + a.preset + "'");
    if (a.extra_context) c.sources.push_back({"extra", SourceKind::provider, a.extra_context});
    auto r = harness::param_rows(v, harness::param_count(c));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (a.output.empty()) harness::write_csv(std::cout, rows);
  else harness::write_csv(fs::path(a.output), rows);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> models;
  std::string dataset;
  std::string split = "test";
  std::size_t workers = 1;
  std::string output;
};

int run_report(const ReportArgs& a) {
  const auto data = synth::load_dataset(a.dataset);
  std::vector<harness::EvalReport> reports;
  std::vector<harness::CsvRow> rows;
  for (const auto& path : a.models) {
    const auto model = load_model(path);
    reports.push_back(harness::evaluate_map(model, data, parse_split(a.split), a.workers));
    const auto& r = reports.back();
    const std::string v(to_string(r.variant));
    rows.push_back({v, "overall", "all", "map", harness::format_number(r.map)});
    rows.push_back({v, "overall", "all", "scored_images", std::to_string(r.scored)});
    rows.push_back({v, "overall", "all", "excluded_images", std::to_string(r.excluded)});
    std::cout << v << " map " << harness::format_number(r.map) << '\n';
  }
  auto marginal = harness::marginal_rows(harness::marginalize_report(reports));
  rows.insert(rows.end(), marginal.begin(), marginal.end());
  const fs::path out = a.output.empty() ? default_output_dir() / "report.csv" : fs::path(a.output);
  harness::write_csv(out, rows);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-selective context models for human-object interaction on synthetic data.\n"
               "Outputs default to $" + std::string(kOutputEnv) + " (or the working directory)."};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--preset", gen.preset, "default, benchmark, shifted, pair or planted")->capture_default_str();
  gen_cmd->add_option("--config", gen.config, "key = value file applied over the preset")->check(CLI::ExistingFile);
  gen_cmd->add_option("-o,--output", gen.output, "dataset file (default <out>/dataset.txt)");
  FieldFlags gen_flags(gen_cmd, synth::GenConfig{}.fields());

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model variant; writes model.ssc and loss.csv");
  train_cmd->add_option("--preset", tr.preset, "desk, benchmark or benchmark_long")->capture_default_str();
  FieldFlags train_flags(train_cmd, harness::ExperimentConfig{}.fields());

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a split and write the report CSV");
  eval_cmd->add_option("--model", ev.model, "model file (default <out>/model.ssc)");
  eval_cmd->add_option("--dataset", ev.dataset, "dataset file")->required();
  eval_cmd->add_option("--split", ev.split, "train or test")->capture_default_str();
  eval_cmd->add_option("--workers,--eval-workers", ev.workers, "evaluation threads")->capture_default_str();
  eval_cmd->add_option("-o,--output", ev.output, "report file (default <out>/eval.csv)");

  GradArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  grad_cmd->add_option("--seeds", gc.seeds, "number of seeds")->capture_default_str();
  grad_cmd->add_option("--first-seed", gc.first_seed, "first seed")->capture_default_str();

  ParamArgs pa;
  auto* params_cmd = app.add_subcommand("params", "Count parameters per module");
  params_cmd->add_option("--variant", pa.variants, "variant (repeatable; default all)");
  params_cmd->add_option("--preset", pa.preset, "desk or benchmark")->capture_default_str();
  params_cmd->add_option("--extra-context", pa.extra_context, "add one provider context of this width");
  params_cmd->add_option("-o,--output", pa.output, "CSV file (default stdout)");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Per-tag mAP and deltas over several models");
  report_cmd->add_option("--model", rep.models, "model file (repeatable; the first is the baseline)")->required();
  report_cmd->add_option("--dataset", rep.dataset, "dataset file")->required();
  report_cmd->add_option("--split", rep.split, "train or test")->capture_default_str();
  report_cmd->add_option("--workers,--eval-workers", rep.workers, "evaluation threads")->capture_default_str();
  report_cmd->add_option("-o,--output", rep.output, "report file (default <out>/report.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) return run_gen(gen, gen_flags);
    if (*train_cmd) return run_train(tr, train_flags);
    if (*eval_cmd) return run_eval(ev);
    if (*grad_cmd) return run_gradcheck(gc);
    if (*params_cmd) return run_params(pa);
    if (*report_cmd) return run_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "ssc: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
