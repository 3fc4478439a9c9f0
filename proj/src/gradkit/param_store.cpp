#include "gradkit/param_store.hpp"

#include <random>
#include <stdexcept>

namespace gradkit {

std::string_view group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kIntraShared:
      return "intra_shared";
    case ParamGroup::kInter:
      return "inter";
  }
  return "unknown";
}

std::size_t ParamStore::add(std::string name, Tensor value, ParamGroup group) {
  if (find(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  Parameter p;
  p.first_moment = Tensor(value.shape());
  p.second_moment = Tensor(value.shape());
  p.name = std::move(name);
  p.value = std::move(value);
  p.group = group;
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range("ParamStore: no parameter named '" + std::string(name) + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  ParamStore store;
  for (const auto& spec : specs) {
    Tensor t(spec.shape);
    for (double& v : t.values()) v = normal(rng);
    store.add(spec.name, std::move(t), spec.group);
  }
  return store;
}

void Gradients::accumulate(std::size_t i, const Tensor& grad) {
  if (slots_[i].empty()) {
    slots_[i] = grad;
  } else {
    slots_[i] += grad;
  }
}

void Gradients::accumulate(const Gradients& other) {
  if (other.size() != size()) throw std::invalid_argument("Gradients: slot count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    if (other.has(i)) accumulate(i, other[i]);
  }
}

void Gradients::scale(double factor) {
  for (auto& s : slots_) s *= factor;
}

}  // namespace gradkit
