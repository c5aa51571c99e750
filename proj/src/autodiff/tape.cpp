// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/tape.hpp"

#include "dlab/errors.hpp"

namespace dlab {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  bool needs = false;
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) throw std::logic_error("tape: input recorded later");
    needs = needs || nodes_[in].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, std::move(inputs),
                        needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Tensor& Tape::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::accumulate_grad(NodeId id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& buf = grad_buffer(id);
  require_same_shape(buf, g, "accumulate_grad");
  double* dst = buf.ptr();
  const double* src = g.ptr();
  for (std::size_t i = 0; i < buf.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(loss.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

}  // namespace dlab
