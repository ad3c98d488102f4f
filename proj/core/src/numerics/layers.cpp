// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/numerics/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ssc/error.hpp"
#include "ssc/numerics/ops.hpp"

namespace ssc::num {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::weight: return "weight";
    case ParamKind::bias: return "bias";
    case ParamKind::bn_affine: return "bn_affine";
    case ParamKind::bn_running: return "bn_running";
    case ParamKind::query: return "query";
  }
  return "unknown";
}

std::string NamedParameter::group() const {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

Tensor& ParameterSet::add(std::string name, Tensor tensor, ParamKind kind) {
  if (contains(name)) throw Error("duplicate parameter name: " + name);
  tensor.set_requires_grad(kind != ParamKind::bn_running);
  entries_.push_back({std::move(name), std::move(tensor), kind});
  return entries_.back().tensor;
}

Tensor& ParameterSet::get(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw Error("no parameter named " + std::string(name));
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw Error("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void xavier_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
}

Linear Linear::create(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  auto w = Tensor::zeros({in, out});
  xavier_uniform(w, in, out, rng);
  Linear layer;
  layer.weight = params.add(prefix + ".weight", std::move(w), ParamKind::weight);
  layer.bias = params.add(prefix + ".bias", Tensor::zeros({1, out}), ParamKind::bias);
  return layer;
}

Tensor linear(Graph& g, const Tensor& x, const Linear& layer) {
  return add_row(g, matmul(g, x, layer.weight), layer.bias);
}

BatchNorm BatchNorm::create(ParameterSet& params, const std::string& prefix, std::size_t features) {
  BatchNorm bn;
  bn.gamma = params.add(prefix + ".gamma", Tensor::filled({1, features}, 1.0), ParamKind::bn_affine);
  bn.beta = params.add(prefix + ".beta", Tensor::zeros({1, features}), ParamKind::bn_affine);
  bn.running_mean = params.add(prefix + ".running_mean", Tensor::zeros({1, features}), ParamKind::bn_running);
  bn.running_var = params.add(prefix + ".running_var", Tensor::filled({1, features}, 1.0), ParamKind::bn_running);
  return bn;
}

Tensor batch_norm(Graph& g, const Tensor& x, const BatchNorm& bn, BatchNormMode mode) {
  const auto n = x.rows(), f = x.cols();
  if (bn.features() != f) {
    throw ShapeError("batch_norm: " + std::to_string(f) + " features, layer has " + std::to_string(bn.features()));
  }
  const auto xv = x.values();
  std::vector<double> mu(f, 0.0), inv_std(f, 0.0);
  if (mode == BatchNormMode::train) {
    if (n < kMinBatchNormRows) {
      throw Error("batch_norm: train mode needs at least " + std::to_string(kMinBatchNormRows) + " rows, got " +
                  std::to_string(n));
    }
    std::vector<double> var(f, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) mu[j] += xv[i * f + j];
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        const double d = xv[i * f + j] - mu[j];
        var[j] += d * d;
      }
    auto rm = bn.running_mean.node()->value.data();
    auto rv = bn.running_var.node()->value.data();
    for (std::size_t j = 0; j < f; ++j) {
      const double biased = var[j] / static_cast<double>(n);
      const double unbiased = var[j] / static_cast<double>(n - 1);
      inv_std[j] = 1.0 / std::sqrt(biased + bn.epsilon);
      rm[j] = (1.0 - bn.momentum) * rm[j] + bn.momentum * mu[j];
      rv[j] = (1.0 - bn.momentum) * rv[j] + bn.momentum * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < f; ++j) {
      mu[j] = bn.running_mean.values()[j];
      inv_std[j] = 1.0 / std::sqrt(bn.running_var.values()[j] + bn.epsilon);
    }
  }

  const Tensor gamma = bn.gamma, beta = bn.beta;
  auto out = g.make_output({n, f}, {&x, &gamma, &beta});
  std::vector<double> xhat(n * f);
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      xhat[i * f + j] = (xv[i * f + j] - mu[j]) * inv_std[j];
      v[i * f + j] = gamma.values()[j] * xhat[i * f + j] + beta.values()[j];
    }

  g.record(out, [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, f,
                 train = mode == BatchNormMode::train](const Node& o) mutable {
    std::vector<double> dsum(f, 0.0), dxhat_sum(f, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        dsum[j] += o.grad[i * f + j];
        dxhat_sum[j] += o.grad[i * f + j] * xhat[i * f + j];
      }
    if (gamma.requires_grad()) {
      auto gg = gamma.mutable_grad();
      for (std::size_t j = 0; j < f; ++j) gg[j] += dxhat_sum[j];
    }
    if (beta.requires_grad()) {
      auto gb = beta.mutable_grad();
      for (std::size_t j = 0; j < f; ++j) gb[j] += dsum[j];
    }
    if (!x.requires_grad()) return;
    auto gx = x.mutable_grad();
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        const double scale = gamma.values()[j] * inv_std[j];
        if (train) {
          gx[i * f + j] += scale / nn * (nn * o.grad[i * f + j] - dsum[j] - xhat[i * f + j] * dxhat_sum[j]);
        } else {
          gx[i * f + j] += scale * o.grad[i * f + j];
        }
      }
  });
  return out;
}

}  // namespace ssc::num
