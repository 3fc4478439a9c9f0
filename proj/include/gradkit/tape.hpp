#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>

#include "gradkit/param_store.hpp"
#include "gradkit/tensor.hpp"

namespace gradkit {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
/// the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  /// Gradient after Tape::backward; empty if nothing flowed into this var.
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of a computation. Nodes are appended in execution
/// order, so the record is already topologically sorted; backward walks it
/// once in reverse.
class Tape {
 public:
  /// Propagates `out_grad` (the gradient of the node being processed) into
  /// the gradients of its inputs via Tape::accumulate_grad.
  using BackwardFn = std::function<void(Tape& tape, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf bound to parameter `index` of `store`. Repeated calls with the same
  /// parameter return the same var, so all uses share one gradient. The store
  /// must outlive the tape and must not be mutated while the tape is in use.
  Var param(const ParamStore& store, std::size_t index);
  Var param(const ParamStore& store, std::string_view name) {
    return param(store, store.index_of(name));
  }

  /// Records an op result. Throws NumericError naming `op` if `value` holds a
  /// NaN or infinity. `backward` may be empty for ops with no differentiable
  /// inputs.
  Var record(std::string op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::string op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Adds `g` into the gradient of `v`; a no-op for constants.
  void accumulate_grad(Var v, const Tensor& g);
  /// Mutable gradient buffer of `v`, zero-allocated on first access. Only
  /// valid for vars that require a gradient.
  Tensor& grad_buffer(Var v);

  /// Reverse-mode sweep from a scalar output. Gradients of earlier sweeps
  /// are cleared first.
  void backward(Var output);

  /// Gradients of every parameter bound through param(), aligned with
  /// `store`. Parameters that never entered the tape get empty slots.
  Gradients param_gradients(const ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.own;
  }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }

 private:
  struct Node {
    std::string op;
    Tensor own;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  // deque keeps references stable while the tape grows.
  std::deque<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::size_t> bound_params_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad(id_); }

}  // namespace gradkit
