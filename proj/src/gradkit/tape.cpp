#include "gradkit/tape.hpp"

#include <vector>

namespace gradkit {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.own = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.own = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  const auto key = std::make_pair(&store, index);
  if (auto it = bound_params_.find(key); it != bound_params_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.op = "param:" + store[index].name;
  n.external = &store[index].value;
  n.requires_grad = true;
  Var v = push(std::move(n));
  bound_params_.emplace(key, v.id());
  return v;
}

Var Tape::record(std::string op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(std::move(op), std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(std::string op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op '" + op + "'");
  }
  Node n;
  n.op = std::move(op);
  n.own = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::invalid_argument("op '" + n.op + "': input from another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor(value(v.id()).shape());
  return n.grad;
}

void Tape::accumulate_grad(Var v, const Tensor& g) {
  if (!nodes_[v.id()].requires_grad) return;
  Tensor& buf = grad_buffer(v);
  if (buf.size() != g.size()) {
    throw ShapeError("backward of '" + nodes_[v.id()].op + "': gradient shape " +
                     shape_string(g.shape()) + " vs value shape " + shape_string(buf.shape()));
  }
  buf += g;
}

void Tape::backward(Var output) {
  if (output.tape_ != this) throw std::invalid_argument("backward: output from another tape");
  if (value(output.id()).size() != 1) {
    throw ShapeError("backward: output must be scalar, got shape " +
                     shape_string(value(output.id()).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[output.id()].requires_grad) return;

  grad_buffer(output).fill(1.0);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient flowing into op '" + n.op + "'");
    }
    n.backward(*this, n.grad);
  }
}

Gradients Tape::param_gradients(const ParamStore& store) const {
  Gradients grads(store.size());
  for (const auto& [key, id] : bound_params_) {
    if (key.first != &store) continue;
    if (!nodes_[id].grad.empty()) grads.accumulate(key.second, nodes_[id].grad);
  }
  return grads;
}

}  // namespace gradkit
