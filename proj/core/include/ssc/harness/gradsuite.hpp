// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ssc::harness {

inline constexpr double kGradTolerance = 1e-4;

struct GradCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  int resamples = 0;

  bool passed() const { return max_rel_error <= kGradTolerance; }
};

/// Central-difference checks of every primitive op, the layers, the context
/// constructors and the end-to-end training loss of each variant, all at small seeded
/// shapes. The body-part attention weights sit behind the straight-through
/// top-k and are left out of the end-to-end check.
std::vector<GradCase> gradient_suite(std::uint64_t seed);

}  // namespace ssc::harness
