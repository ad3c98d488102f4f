// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssc/model.hpp"

namespace ssc::harness {

/// Scalar counts split by kind. Batch-norm running statistics are state,
/// not learned weights, and are kept apart from the affine terms.
struct KindCounts {
  std::size_t weights = 0;
  std::size_t biases = 0;
  std::size_t bn_affine = 0;
  std::size_t bn_running = 0;
  std::size_t query = 0;

  std::size_t total() const { return weights + biases + bn_affine + bn_running + query; }
  KindCounts& operator+=(const KindCounts& o);
};

struct ModuleCount {
  std::string module;  // parameter group, e.g. "cls.fc1" or "psi.stuff"
  KindCounts counts;
};

struct ParamCount {
  std::vector<ModuleCount> modules;  // canonical order
  KindCounts totals;

  std::size_t total() const { return totals.total(); }
  /// Zero when absent.
  KindCounts module(const std::string& name) const;
};

ParamCount param_count(const Model& model);
/// Builds the variant from its config alone; throws ConfigError on
/// underspecified dimensions.
ParamCount param_count(const ModelConfig& config);

}  // namespace ssc::harness
