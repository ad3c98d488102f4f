// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssc/error.hpp"

namespace ssc::num {

namespace {

// One-sided slopes further apart than this (relative) mark a kink.
constexpr double kKinkThreshold = 1e-4;

double evaluate(const ScalarFunction& f, std::span<const Tensor> inputs) {
  Graph g(Graph::Recording::disabled);
  return f(g, inputs).item();
}

struct Attempt {
  bool kink = false;
  GradcheckResult result;
};

Attempt check_once(const ScalarFunction& f, std::span<Tensor> inputs, double h) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    auto out = f(g, inputs);
    if (out.size() != 1) throw ShapeError("gradcheck needs a scalar-valued function");
    g.backward(out);
    for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());
  }

  Attempt attempt;
  const double f0 = evaluate(f, inputs);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double fp = evaluate(f, inputs);
      values[i] = saved - h;
      const double fm = evaluate(f, inputs);
      values[i] = saved;

      const double a = analytic[k][i];
      const double scale = std::max(1.0, std::abs(a));
      const double forward = (fp - f0) / h;
      const double backward = (f0 - fm) / h;
      if (std::abs(forward - backward) > kKinkThreshold * scale) {
        attempt.kink = true;
        return attempt;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      attempt.result.max_rel_error = std::max(attempt.result.max_rel_error, std::abs(a - numeric) / scale);
      ++attempt.result.coordinates;
    }
  }
  return attempt;
}

}  // namespace

GradcheckResult gradcheck(const ScalarFunction& f, std::span<Tensor> inputs, const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw Error("gradcheck step must be positive");
  for (int resamples = 0;; ++resamples) {
    auto attempt = check_once(f, inputs, options.step);
    if (!attempt.kink) {
      attempt.result.resamples = resamples;
      return attempt.result;
    }
    if (!options.resample || resamples >= options.max_resamples) {
      throw NumericError("gradcheck: non-differentiable point after " + std::to_string(resamples) + " resamples");
    }
    options.resample(inputs, resamples + 1);
  }
}

}  // namespace ssc::num
