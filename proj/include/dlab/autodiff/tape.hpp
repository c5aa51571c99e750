// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dlab/autodiff/tensor.hpp"

namespace dlab {

class Tape;

using NodeId = std::size_t;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Reverse-mode recording. Nodes are appended in evaluation order, so the
/// node list is already a topological order and backward() walks it in
/// reverse.
class Tape {
 public:
  /// Called during backward with the tape and the id of the node whose
  /// gradient is complete. It pushes contributions into its inputs with
  /// accumulate_grad().
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a trainable value (parameters, attacked inputs).
  Var variable(Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Result of a primitive. The node requires a gradient iff any input does.
  Var record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_[id].inputs; }

  /// Gradient of the last backward() target w.r.t. `v`; zeros if `v` was
  /// not reached.
  Tensor grad(Var v) const;
  const Tensor& grad_ref(NodeId id) const { return nodes_[id].grad; }

  /// Adds `g` into the gradient of `id`. No-op for nodes without gradient.
  void accumulate_grad(NodeId id, const Tensor& g);
  /// Mutable gradient buffer of `id`, zero-initialised on first access.
  Tensor& grad_buffer(NodeId id);

  /// Populates gradients of every node that `loss` depends on. The loss
  /// must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace dlab
