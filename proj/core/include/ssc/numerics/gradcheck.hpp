// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ssc/numerics/tensor.hpp"

namespace ssc::num {

/// Builds a scalar from `inputs` on the given graph.
using ScalarFunction = std::function<Tensor(Graph&, std::span<const Tensor>)>;

struct GradcheckOptions {
  double step = 1e-5;
  /// Called with the inputs and the attempt number when a kink is detected
  /// (e.g. an exact max tie). Without it a kink is reported immediately.
  std::function<void(std::span<Tensor>, int)> resample;
  int max_resamples = 3;
};

struct GradcheckResult {
  /// max over coordinates of |analytic - numeric| / max(1, |analytic|)
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  int resamples = 0;
};

/// Compares reverse-mode gradients of `f` against central differences for
/// every coordinate of every input. Throws NumericError when the point is
/// non-differentiable after `max_resamples` resamples.
GradcheckResult gradcheck(const ScalarFunction& f, std::span<Tensor> inputs, const GradcheckOptions& options = {});

}  // namespace ssc::num
