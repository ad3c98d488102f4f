// SPDX-FileCopyrightText: © 2026 The ssc authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ssc/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssc/error.hpp"

namespace ssc::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double v, bool requires_grad) {
  check_shape(shape);
  auto n = std::make_shared<Node>();
  const auto count = shape_size(shape);
  n->shape = std::move(shape);
  n->value.assign(count, v);
  n->grad.assign(count, 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) +
                     " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->grad.assign(values.size(), 0.0);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1}, {v}, requires_grad); }

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("rank-" + std::to_string(s.size()) + " tensor has no matrix view");
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw ShapeError("rank-" + std::to_string(s.size()) + " tensor has no matrix view");
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() const { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach_copy(bool requires_grad) const { return from(shape(), node_->value, requires_grad); }

Tensor Graph::make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  bool needs = false;
  if (recording()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  auto out = Tensor::zeros(std::move(shape), needs);
  return out;
}

Tensor Graph::make_output(Shape shape, std::span<const Tensor> inputs) {
  bool needs = false;
  if (recording()) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  return Tensor::zeros(std::move(shape), needs);
}

void Graph::record(const Tensor& out, std::function<void(const Node&)> backward) {
  if (!recording() || !out.requires_grad()) return;
  tape_.push_back({out.node(), std::move(backward)});
}

void Graph::backward(const Tensor& loss, const std::function<void(std::size_t)>& visit) {
  if (consumed_) throw Error("backward() called twice on the same graph");
  if (loss.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.node()->grad[0] += 1.0;
  for (std::size_t i = tape_.size(); i-- > 0;) {
    if (visit) visit(i);
    tape_[i].backward(*tape_[i].output);
  }
}

}  // namespace ssc::num
