// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ssc/numerics/random.hpp"
#include "ssc/numerics/tensor.hpp"

namespace ssc::num {

enum class ParamKind { weight, bias, bn_affine, bn_running, query };

std::string_view to_string(ParamKind kind);

struct NamedParameter {
  std::string name;
  Tensor tensor;
  ParamKind kind;

  bool trainable() const { return kind != ParamKind::bn_running; }
  /// Name up to the last '.', e.g. "cls.fc1" for "cls.fc1.weight".
  std::string group() const;
};

/// Ordered registry of every tensor a model owns. Insertion order is the
/// canonical order used for saving, loading and counting.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor tensor, ParamKind kind);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  std::vector<NamedParameter>& entries() { return entries_; }

  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grad();
  std::size_t count() const;

 private:
  std::vector<NamedParameter> entries_;
};

/// y = x · weight + bias, weight in×out, bias 1×out.
struct Linear {
  Tensor weight;
  Tensor bias;

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }

  /// Registers `<prefix>.weight` and `<prefix>.bias`, weights uniform in
  /// ±sqrt(6 / (in + out)) and zero biases.
  static Linear create(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
};

Tensor linear(Graph& g, const Tensor& x, const Linear& layer);

enum class BatchNormMode { train, eval };

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  std::size_t features() const { return gamma.size(); }

  static BatchNorm create(ParameterSet& params, const std::string& prefix, std::size_t features);
};

inline constexpr std::size_t kMinBatchNormRows = 8;

/// Train mode normalizes with the biased batch statistics of the rows and
/// updates the running estimates (unbiased variance) with `momentum`; it
/// needs at least kMinBatchNormRows rows. Eval mode is the fixed affine map
/// defined by the running estimates.
Tensor batch_norm(Graph& g, const Tensor& x, const BatchNorm& bn, BatchNormMode mode);

/// Fills `t` uniformly in ±sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace ssc::num
