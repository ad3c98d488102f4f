// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/numerics/optimizer.hpp"

#include <cmath>

#include "ssc/error.hpp"

namespace ssc::num {

void OptimizerState::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must be in (0, 1]");
  if (decay_epoch == 0) throw ConfigError("decay epoch must be positive");
}

void sgd_step(ParameterSet& params, const OptimizerState& opt) {
  for (const auto& p : params.entries()) {
    if (!p.trainable()) continue;
    for (double gv : p.tensor.grad()) {
      if (!std::isfinite(gv)) throw NumericError("non-finite gradient in parameter group " + p.group());
    }
  }
  const double rate = opt.rate();
  for (auto& p : params.entries()) {
    if (!p.trainable()) continue;
    auto v = p.tensor.mutable_values();
    const auto gr = p.tensor.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= rate * gr[i];
  }
  params.zero_grad();
}

}  // namespace ssc::num
