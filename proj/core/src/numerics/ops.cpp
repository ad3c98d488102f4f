// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssc/error.hpp"

namespace ssc::num {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dims(const Tensor& t) { return shape_string(t.shape()); }

// C[n×m] += A[n×k] · B[k×m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n×m] += A[n×k] · B[m×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * m + j] += acc;
    }
  }
}

// C[k×m] += A[n×k]ᵀ · B[n×m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  const auto n = a.rows(), k = a.cols(), m = b.cols();
  require(b.rows() == k, "matmul: " + dims(a) + " x " + dims(b));
  auto out = g.make_output({n, m}, {&a, &b});
  gemm_nn(a.values().data(), b.values().data(), out.mutable_values().data(), n, k, m);
  g.record(out, [a, b, n, k, m](const Node& o) mutable {
    if (a.requires_grad()) gemm_nt(o.grad.data(), b.values().data(), a.mutable_grad().data(), n, m, k);
    if (b.requires_grad()) gemm_tn(a.values().data(), o.grad.data(), b.mutable_grad().data(), n, k, m);
  });
  return out;
}

Tensor matmul_transposed(Graph& g, const Tensor& a, const Tensor& b) {
  const auto n = a.rows(), k = a.cols(), m = b.rows();
  require(b.cols() == k, "matmul_transposed: " + dims(a) + " x " + dims(b) + "^T");
  auto out = g.make_output({n, m}, {&a, &b});
  gemm_nt(a.values().data(), b.values().data(), out.mutable_values().data(), n, k, m);
  g.record(out, [a, b, n, k, m](const Node& o) mutable {
    // dA = dC · B ; dB = dCᵀ · A
    if (a.requires_grad()) gemm_nn(o.grad.data(), b.values().data(), a.mutable_grad().data(), n, m, k);
    if (b.requires_grad()) gemm_tn(o.grad.data(), a.values().data(), b.mutable_grad().data(), n, m, k);
  });
  return out;
}

Tensor transpose(Graph& g, const Tensor& a) {
  const auto n = a.rows(), m = a.cols();
  auto out = g.make_output({m, n}, {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) v[j * n + i] = a.values()[i * m + j];
  g.record(out, [a, n, m](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += o.grad[j * n + i];
  });
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: " + dims(a) + " vs " + dims(b));
  auto out = g.make_output(a.shape(), {&a, &b});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
  g.record(out, [a, b](const Node& o) mutable {
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gt = t->mutable_grad();
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += o.grad[i];
    }
  });
  return out;
}

Tensor add_row(Graph& g, const Tensor& a, const Tensor& row) {
  const auto n = a.rows(), m = a.cols();
  require(row.size() == m, "add_row: " + dims(a) + " + " + dims(row));
  auto out = g.make_output({n, m}, {&a, &row});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] = a.values()[i * m + j] + row.values()[j];
  g.record(out, [a, row, n, m](const Node& o) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < n * m; ++i) ga[i] += o.grad[i];
    }
    if (row.requires_grad()) {
      auto gr = row.mutable_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gr[j] += o.grad[i * m + j];
    }
  });
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: " + dims(a) + " vs " + dims(b));
  auto out = g.make_output(a.shape(), {&a, &b});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  g.record(out, [a, b](const Node& o) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * b.values()[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * a.values()[i];
    }
  });
  return out;
}

Tensor mul_col(Graph& g, const Tensor& a, const Tensor& col) {
  const auto n = a.rows(), m = a.cols();
  require(col.size() == n, "mul_col: " + dims(a) + " * " + dims(col));
  auto out = g.make_output({n, m}, {&a, &col});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] = a.values()[i * m + j] * col.values()[i];
  g.record(out, [a, col, n, m](const Node& o) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += o.grad[i * m + j] * col.values()[i];
    }
    if (col.requires_grad()) {
      auto gc = col.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += o.grad[i * m + j] * a.values()[i * m + j];
        gc[i] += acc;
      }
    }
  });
  return out;
}

Tensor scale(Graph& g, const Tensor& a, double factor) {
  auto out = g.make_output(a.shape(), {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * factor;
  g.record(out, [a, factor](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * factor;
  });
  return out;
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const auto n = parts[0].rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    require(p.rows() == n, "concat_cols: row mismatch " + dims(parts[0]) + " vs " + dims(p));
    width += p.cols();
  }
  auto out = g.make_output({n, width}, parts);
  auto v = out.mutable_values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(p.values().data() + i * w, w, v.data() + i * width + offset);
    offset += w;
  }
  g.record(out, [ps = std::vector<Tensor>(parts.begin(), parts.end()), n, width](const Node& o) mutable {
    std::size_t offset = 0;
    for (auto& p : ps) {
      const auto w = p.cols();
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += o.grad[i * width + offset + j];
      }
      offset += w;
    }
  });
  return out;
}

Tensor concat_rows(Graph& g, std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const auto m = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.cols() == m, "concat_rows: column mismatch " + dims(parts[0]) + " vs " + dims(p));
    total += p.rows();
  }
  auto out = g.make_output({total, m}, parts);
  auto v = out.mutable_values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), v.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  g.record(out, [ps = std::vector<Tensor>(parts.begin(), parts.end())](const Node& o) mutable {
    std::size_t offset = 0;
    for (auto& p : ps) {
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += o.grad[offset + i];
      }
      offset += p.size();
    }
  });
  return out;
}

Tensor slice_rows(Graph& g, const Tensor& a, std::size_t begin, std::size_t count) {
  const auto m = a.cols();
  require(count > 0 && begin + count <= a.rows(), "slice_rows: rows [" + std::to_string(begin) + ", " +
                                                      std::to_string(begin + count) + ") of " + dims(a));
  auto out = g.make_output({count, m}, {&a});
  std::copy_n(a.values().data() + begin * m, count * m, out.mutable_values().data());
  g.record(out, [a, begin, count, m](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < count * m; ++i) ga[begin * m + i] += o.grad[i];
  });
  return out;
}

Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows) {
  const auto m = a.cols();
  require(!rows.empty(), "gather_rows: no rows");
  for (auto r : rows) require(r < a.rows(), "gather_rows: row " + std::to_string(r) + " of " + dims(a));
  auto out = g.make_output({rows.size(), m}, {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(a.values().data() + rows[i] * m, m, v.data() + i * m);
  g.record(out, [a, idx = std::vector<std::size_t>(rows.begin(), rows.end()), m](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) ga[idx[i] * m + j] += o.grad[i * m + j];
  });
  return out;
}

Tensor broadcast_rows(Graph& g, const Tensor& row, std::size_t n) {
  require(row.rows() == 1 && n > 0, "broadcast_rows: " + dims(row));
  const auto m = row.cols();
  auto out = g.make_output({n, m}, {&row});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i) std::copy_n(row.values().data(), m, v.data() + i * m);
  g.record(out, [row, n, m](const Node& o) mutable {
    auto gr = row.mutable_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) gr[j] += o.grad[i * m + j];
  });
  return out;
}

Tensor reshape(Graph& g, const Tensor& a, Shape shape) {
  require(shape_size(shape) == a.size(), "reshape: " + dims(a) + " -> " + shape_string(shape));
  auto out = g.make_output(std::move(shape), {&a});
  std::copy(a.values().begin(), a.values().end(), out.mutable_values().begin());
  g.record(out, [a](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
  });
  return out;
}

Tensor relu(Graph& g, const Tensor& a) {
  auto out = g.make_output(a.shape(), {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  g.record(out, [a](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (a.values()[i] > 0.0) ga[i] += o.grad[i];
  });
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& a) {
  auto out = g.make_output(a.shape(), {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = a.values()[i];
    // Split on sign so exp() never overflows.
    if (x >= 0.0) {
      v[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      v[i] = e / (1.0 + e);
    }
  }
  g.record(out, [a](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * o.value[i] * (1.0 - o.value[i]);
  });
  return out;
}

Tensor softmax_rows(Graph& g, const Tensor& a) {
  const auto n = a.rows(), m = a.cols();
  for (double x : a.values()) {
    if (!std::isfinite(x)) throw NumericError("non-finite logits");
  }
  auto out = g.make_output({n, m}, {&a});
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = a.values().data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      v[i * m + j] = std::exp(row[j] - mx);
      z += v[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] /= z;
  }
  g.record(out, [a, n, m](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += o.grad[i * m + j] * o.value[i * m + j];
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += o.value[i * m + j] * (o.grad[i * m + j] - dot);
    }
  });
  return out;
}

MaxPoolResult group_max_pool(Graph& g, const Tensor& y, std::size_t group_rows) {
  const auto n = y.rows(), s = y.cols();
  if (group_rows == 0 || n == 0) throw ShapeError("max pool over an empty set of rows");
  require(n % group_rows == 0, "group_max_pool: " + std::to_string(n) + " rows not divisible into groups of " +
                                   std::to_string(group_rows));
  const auto groups = n / group_rows;
  MaxPoolResult result{g.make_output({groups, s}, {&y}), std::vector<std::size_t>(groups * s, 0)};
  auto v = result.pooled.mutable_values();
  const auto yv = y.values();
  for (std::size_t b = 0; b < groups; ++b) {
    for (std::size_t c = 0; c < s; ++c) {
      std::size_t best = 0;
      double best_v = yv[(b * group_rows) * s + c];
      for (std::size_t r = 1; r < group_rows; ++r) {
        const double x = yv[(b * group_rows + r) * s + c];
        if (x > best_v) {
          best_v = x;
          best = r;
        }
      }
      v[b * s + c] = best_v;
      result.winners[b * s + c] = best;
    }
  }
  g.record(result.pooled, [y, winners = result.winners, groups, group_rows, s](const Node& o) mutable {
    auto gy = y.mutable_grad();
    for (std::size_t b = 0; b < groups; ++b)
      for (std::size_t c = 0; c < s; ++c) gy[(b * group_rows + winners[b * s + c]) * s + c] += o.grad[b * s + c];
  });
  return result;
}

MaxPoolResult row_max_pool(Graph& g, const Tensor& y) { return group_max_pool(g, y, y.rows()); }

Tensor masked_mean(Graph& g, const Tensor& features, const Tensor& masks) {
  const auto p = features.rows(), d = features.cols(), k = masks.rows();
  require(masks.cols() == p, "masked_mean: masks " + dims(masks) + " vs features " + dims(features));
  std::vector<double> weights(masks.values().begin(), masks.values().end());
  for (std::size_t r = 0; r < k; ++r) {
    double area = 0.0;
    for (std::size_t q = 0; q < p; ++q) area += weights[r * p + q];
    if (area <= 0.0) throw ShapeError("masked_mean: mask " + std::to_string(r) + " has no positive pixel");
    for (std::size_t q = 0; q < p; ++q) weights[r * p + q] /= area;
  }
  auto out = g.make_output({k, d}, {&features});
  gemm_nn(weights.data(), features.values().data(), out.mutable_values().data(), k, p, d);
  g.record(out, [features, w = std::move(weights), k, p, d](const Node& o) mutable {
    gemm_tn(w.data(), o.grad.data(), features.mutable_grad().data(), k, p, d);
  });
  return out;
}

Tensor gated_sum(Graph& g, const Tensor& weights, const Tensor& values) {
  require(weights.cols() == values.rows(),
          "gated_sum: gates " + dims(weights) + " do not match values " + dims(values));
  const auto n = weights.rows(), m = weights.cols(), c = values.cols();
  auto out = g.make_output({n, c}, {&weights, &values});
  auto v = out.mutable_values();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      const double w = weights.values()[j * m + i];
      for (std::size_t q = 0; q < c; ++q) v[j * c + q] += w * values.values()[i * c + q];
    }
  g.record(out, [weights, values, n, m, c](const Node& o) mutable {
    if (weights.requires_grad()) gemm_nt(o.grad.data(), values.values().data(), weights.mutable_grad().data(), n, c, m);
    if (values.requires_grad()) gemm_tn(weights.values().data(), o.grad.data(), values.mutable_grad().data(), n, m, c);
  });
  return out;
}

Tensor bce_loss(Graph& g, const Tensor& probs, std::span<const double> targets) {
  if (targets.size() != probs.size()) {
    throw ShapeError("bce_loss: " + std::to_string(probs.size()) + " probabilities vs " +
                     std::to_string(targets.size()) + " targets");
  }
  for (double t : targets) {
    if (t != 0.0 && t != 1.0) throw Error("bce_loss: targets must be 0 or 1");
  }
  const auto n = probs.size();
  auto out = g.make_output({1, 1}, {&probs});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs.values()[i], kProbClamp, 1.0 - kProbClamp);
    total -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  out.mutable_values()[0] = total / static_cast<double>(n);
  g.record(out, [probs, t = std::vector<double>(targets.begin(), targets.end()), n](const Node& o) mutable {
    auto gp = probs.mutable_grad();
    const double up = o.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = probs.values()[i];
      // The clamp is flat outside its range.
      if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
      gp[i] += up * (p - t[i]) / (p * (1.0 - p));
    }
  });
  return out;
}

Tensor sum(Graph& g, const Tensor& a) {
  auto out = g.make_output({1, 1}, {&a});
  double total = 0.0;
  for (double x : a.values()) total += x;
  out.mutable_values()[0] = total;
  g.record(out, [a](const Node& o) mutable {
    auto ga = a.mutable_grad();
    for (auto& x : ga) x += o.grad[0];
  });
  return out;
}

Tensor mean(Graph& g, const Tensor& a) { return scale(g, sum(g, a), 1.0 / static_cast<double>(a.size())); }

}  // namespace ssc::num
