#include "gradkit/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace gradkit {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) + " values do not fill shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("Tensor::from_rows: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({n, m}, std::move(values));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  switch (shape_.size()) {
    case 0:
    case 1:
      return 1;
    case 2:
      return shape_[0];
    default:
      throw ShapeError("Tensor::rows: rank " + std::to_string(shape_.size()) +
                       " tensor has no matrix view");
  }
}

std::size_t Tensor::cols() const {
  switch (shape_.size()) {
    case 0:
      return 1;
    case 1:
      return shape_[0];
    case 2:
      return shape_[1];
    default:
      throw ShapeError("Tensor::cols: rank " + std::to_string(shape_.size()) +
                       " tensor has no matrix view");
  }
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("Tensor::item: shape " + shape_string(shape_) + " is not a scalar");
  }
  return values_[0];
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.values_.size() != values_.size()) {
    throw ShapeError("Tensor::operator+=: " + shape_string(shape_) + " vs " +
                     shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (double& v : values_) v *= factor;
  return *this;
}

}  // namespace gradkit
