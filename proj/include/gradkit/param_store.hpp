#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradkit/tensor.hpp"

namespace gradkit {

/// Learning-rate group. Every parameter belongs to exactly one.
enum class ParamGroup : std::uint8_t { kIntraShared = 0, kInter = 1 };

std::string_view group_name(ParamGroup group);

struct Parameter {
  std::string name;
  Tensor value;
  ParamGroup group = ParamGroup::kIntraShared;
  // Adam state; shapes always match `value`.
  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t steps = 0;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamGroup group = ParamGroup::kIntraShared;
};

/// Named parameter tensors plus their optimizer state, in insertion order.
class ParamStore {
 public:
  /// Adds a parameter with zeroed Adam moments. Throws std::invalid_argument
  /// on a duplicate name.
  std::size_t add(std::string name, Tensor value, ParamGroup group);

  std::optional<std::size_t> find(std::string_view name) const;
  /// Index of `name`; throws std::out_of_range when absent.
  std::size_t index_of(std::string_view name) const;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Total scalar count across all parameters.
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
};

/// Draws every parameter from N(0, stddev^2) using a generator seeded with
/// `seed`; identical (specs, seed) pairs give identical stores.
ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed,
                       double stddev = 0.1);

/// Per-parameter gradient slots aligned with a ParamStore. Empty slots mean
/// "no gradient" and are skipped by the optimizer.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::size_t count) : slots_(count) {}

  std::size_t size() const { return slots_.size(); }
  bool has(std::size_t i) const { return !slots_[i].empty(); }
  const Tensor& operator[](std::size_t i) const { return slots_[i]; }

  /// Adds `grad` into slot i, allocating the slot on first use.
  void accumulate(std::size_t i, const Tensor& grad);
  /// Slot-wise sum; slot counts must match.
  void accumulate(const Gradients& other);
  void scale(double factor);

 private:
  std::vector<Tensor> slots_;
};

}  // namespace gradkit
