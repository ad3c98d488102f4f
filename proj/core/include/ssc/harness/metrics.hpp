// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ssc::harness {

/// Categories ordered by descending score; ties go to the lower index.
std::vector<std::size_t> rank_categories(std::span<const double> scores);

/// Mean, over the positive labels, of precision at each positive's rank.
/// Empty when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MeanAp {
  double value = 0.0;        // 0 when nothing was scored
  std::size_t scored = 0;    // images contributing an AP
  std::size_t excluded = 0;  // images without a positive label
};

/// Instance-based mAP: mean of per-image APs. `scores` is images × S.
MeanAp instance_map(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t categories);

}  // namespace ssc::harness
