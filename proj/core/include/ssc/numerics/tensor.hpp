// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ssc::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
};

/// Dense row-major array of doubles with an accumulated gradient.
///
/// A Tensor is a shared handle: copies refer to the same storage. Leaves
/// (parameters and inputs) are created with the factory functions; every
/// other tensor is produced by an op recorded on a Graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  // 2-D view; rank-1 tensors read as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node_->value; }
  // The handle is const; the shared storage is not.
  std::span<double> mutable_values() const { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() const { return node_->grad; }

  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) const { node_->requires_grad = on; }
  void zero_grad() const;

  /// Copies values and shape into a fresh, unconnected leaf.
  Tensor detach_copy(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  friend class Graph;

  std::shared_ptr<Node> node_;
};

/// Tape of recorded ops. backward() replays the tape in exact reverse of
/// creation order; gradients are accumulated additively into inputs.
///
/// A Graph must not be shared across concurrent backward passes.
class Graph {
 public:
  enum class Recording { enabled, disabled };

  explicit Graph(Recording mode = Recording::enabled) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return mode_ == Recording::enabled; }

  /// Allocates an op output. It requires grad iff recording and any input does.
  Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);
  Tensor make_output(Shape shape, std::span<const Tensor> inputs);

  /// Records the backward closure for `out`. The closure receives the output
  /// node (whose grad holds the upstream gradient). No-op if `out` does not
  /// require grad.
  void record(const Tensor& out, std::function<void(const Node&)> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  /// `visit`, when set, is called with each tape index as it is replayed.
  void backward(const Tensor& loss, const std::function<void(std::size_t)>& visit = {});

  std::size_t size() const noexcept { return tape_.size(); }

 private:
  struct Entry {
    std::shared_ptr<Node> output;
    std::function<void(const Node&)> backward;
  };

  Recording mode_;
  std::vector<Entry> tape_;
  bool consumed_ = false;
};

}  // namespace ssc::num
