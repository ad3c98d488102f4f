// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssc/error.hpp"

namespace ssc::harness {

std::vector<std::size_t> rank_categories(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("average_precision: scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("average_precision: NaN score");
  const auto order = rank_categories(scores);
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!labels[order[r]]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return total / static_cast<double>(hits);
}

MeanAp instance_map(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t categories) {
  if (categories == 0 || scores.size() % categories != 0 || labels.size() != scores.size()) {
    throw ShapeError("instance_map: scores and labels must both be images x categories");
  }
  MeanAp out;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size() / categories; ++i) {
    auto ap = average_precision(scores.subspan(i * categories, categories), labels.subspan(i * categories, categories));
    if (!ap) {
      ++out.excluded;
      continue;
    }
    total += *ap;
    ++out.scored;
  }
  if (out.scored) out.value = total / static_cast<double>(out.scored);
  return out;
}

}  // namespace ssc::harness
