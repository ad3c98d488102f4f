// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "ssc/numerics/layers.hpp"

namespace ssc::num {

/// Plain SGD with a single step decay: the rate drops to
/// learning_rate * decay_factor at the start of epoch `decay_epoch`
/// (0-based) and stays there.
struct OptimizerState {
  double learning_rate = 0.001;
  double decay_factor = 0.1;
  std::size_t decay_epoch = 15;
  std::size_t epoch = 0;

  double rate() const { return epoch >= decay_epoch ? learning_rate * decay_factor : learning_rate; }
  void validate() const;
};

/// p <- p - rate * grad(p) for every trainable parameter, then zeroes all
/// gradients. Throws NumericError naming the parameter group if any gradient
/// is non-finite; in that case no parameter is touched.
void sgd_step(ParameterSet& params, const OptimizerState& opt);

}  // namespace ssc::num
