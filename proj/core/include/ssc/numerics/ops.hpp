// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssc/numerics/tensor.hpp"

// Differentiable primitives. Every op takes the Graph it records onto and
// treats its inputs as matrices (rank-1 tensors read as one row).
namespace ssc::num {

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
/// a · bᵀ without materializing the transpose.
Tensor matmul_transposed(Graph& g, const Tensor& a, const Tensor& b);
Tensor transpose(Graph& g, const Tensor& a);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
/// Adds a 1×m row to every row of an n×m matrix.
Tensor add_row(Graph& g, const Tensor& a, const Tensor& row);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
/// Scales row i of an n×m matrix by col[i] (col is n×1).
Tensor mul_col(Graph& g, const Tensor& a, const Tensor& col);
Tensor scale(Graph& g, const Tensor& a, double factor);

Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
Tensor concat_rows(Graph& g, std::span<const Tensor> parts);
Tensor slice_rows(Graph& g, const Tensor& a, std::size_t begin, std::size_t count);
Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows);
Tensor broadcast_rows(Graph& g, const Tensor& row, std::size_t n);
Tensor reshape(Graph& g, const Tensor& a, Shape shape);

Tensor relu(Graph& g, const Tensor& a);
Tensor sigmoid(Graph& g, const Tensor& a);

/// Row-wise softmax with max subtraction. Throws NumericError("non-finite
/// logits") on NaN/Inf input.
Tensor softmax_rows(Graph& g, const Tensor& a);

struct MaxPoolResult {
  Tensor pooled;
  /// winners[b * cols + s]: row (relative to its group) holding the max.
  std::vector<std::size_t> winners;
};

/// Column-wise max over all rows: N×S -> 1×S. Ties go to the lowest row.
/// Backward routes each gradient component to its winner row only.
MaxPoolResult row_max_pool(Graph& g, const Tensor& y);
/// Same, applied to consecutive blocks of `group_rows` rows: (B·n)×S -> B×S.
MaxPoolResult group_max_pool(Graph& g, const Tensor& y, std::size_t group_rows);

/// features: P×D; masks: K×P of 0/1 weights (not differentiated).
/// Row k of the K×D result is the mean of features over the pixels of mask k.
Tensor masked_mean(Graph& g, const Tensor& features, const Tensor& masks);

/// Σ_i weights[j,i] · values[i,·] for each row j (N×M, M×C -> N×C).
Tensor gated_sum(Graph& g, const Tensor& weights, const Tensor& values);

/// Mean binary cross-entropy. Probabilities are clamped to [1e-7, 1-1e-7];
/// targets must be 0 or 1 and match probs in size.
Tensor bce_loss(Graph& g, const Tensor& probs, std::span<const double> targets);

Tensor sum(Graph& g, const Tensor& a);
Tensor mean(Graph& g, const Tensor& a);

inline constexpr double kProbClamp = 1e-7;

}  // namespace ssc::num
