// include/crnnse/graph.hpp

// Copyright 2026 The crnnse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crnnse/tensor.hpp"

namespace crnnse {

template <typename Scalar>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr && id_ >= 0; }
  Graph<Scalar>& graph() const { return *graph_; }
  int id() const { return id_; }
  const Tensor<Scalar>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
  Scalar item() const { return value().item(); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

/// Tape of operator records for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it
/// and reverse insertion order is a valid reverse topological order.
///
/// Parameters are bound by reference with param(); their gradients accumulate
/// into the caller's Tensor across backward() calls until the caller resets
/// them. Gradients of intermediate nodes are recomputed from scratch on every
/// backward() call.
template <typename Scalar>
class Graph {
 public:
  using TensorType = Tensor<Scalar>;
  using VectorType = Vector<Scalar>;
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  /// With grad_enabled == false, bound parameters are treated as constants and
  /// no backward closures are kept (inference).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding a value that never receives a gradient.
  Var<Scalar> constant(TensorType value) {
    Node node;
    node.owned = std::make_unique<TensorType>(std::move(value));
    node.tensor = node.owned.get();
    node.tensor->set_requires_grad(false);
    return push(std::move(node));
  }

  /// Leaf bound to an externally owned tensor. Binding the same tensor twice
  /// returns the same node.
  Var<Scalar> param(TensorType& tensor) {
    if (auto it = bound_.find(&tensor); it != bound_.end()) return {this, it->second};
    Node node;
    node.tensor = &tensor;
    node.external = true;
    node.needs_grad = grad_enabled_ && tensor.requires_grad();
    Var<Scalar> v = push(std::move(node));
    bound_.emplace(&tensor, v.id());
    return v;
  }

  /// Appends an operator output. `backward` receives the graph and this
  /// node's id and must accumulate into grad(input) for inputs that need it.
  Var<Scalar> record(TensorType output, std::vector<int> inputs, BackwardFn backward) {
    Node node;
    for (int in : inputs) {
      if (in < 0 || in >= static_cast<int>(nodes_.size())) {
        throw PreconditionError("operator input does not precede its output in the graph");
      }
      node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    }
    node.owned = std::make_unique<TensorType>(std::move(output));
    node.tensor = node.owned.get();
    node.inputs = std::move(inputs);
    if (node.needs_grad) node.backward = std::move(backward);
    return push(std::move(node));
  }

  const TensorType& value(int id) const { return *nodes_.at(id).tensor; }
  bool needs_grad(int id) const { return nodes_.at(id).needs_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  /// Gradient slot of a node; allocated on first access.
  VectorType& grad(int id) { return nodes_[id].tensor->grad(); }

  /// Reverse-mode sweep from a scalar loss.
  void backward(const Var<Scalar>& loss) {
    if (!loss.valid() || &loss.graph() != this) {
      throw PreconditionError("backward: loss is detached from this graph");
    }
    if (value(loss.id()).size() != 1) {
      throw DimensionError("backward: loss must be scalar, got shape " +
                           shape_string(value(loss.id()).shape()));
    }
    for (Node& node : nodes_) {
      if (node.external) {
        if (node.needs_grad) node.tensor->grad();
      } else if (node.needs_grad) {
        node.tensor->zero_grad();
      }
    }
    if (!nodes_[loss.id()].needs_grad) return;
    grad(loss.id())(0) += Scalar(1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& node = nodes_[id];
      if (node.needs_grad && node.backward) node.backward(*this, id);
    }
  }

 private:
  struct Node {
    std::unique_ptr<TensorType> owned;
    TensorType* tensor = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    bool external = false;
  };

  Var<Scalar> push(Node node) {
    nodes_.push_back(std::move(node));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  std::unordered_map<const TensorType*, int> bound_;
};

/// Convenience wrapper matching the free-function style of the operators.
template <typename Scalar>
void backward(const Var<Scalar>& loss) {
  loss.graph().backward(loss);
}

}  // namespace crnnse
