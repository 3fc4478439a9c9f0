#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradkit {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible. The message names the op
/// and both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces a NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Any rank is storable, but every op in ops.hpp reads its operands as
/// matrices: rank 0 is 1x1, rank 1 of length n is 1xn, rank 2 is itself.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  /// Builds a rows x cols matrix from nested initializer lists.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(std::initializer_list<double> values);
  static Tensor scalar(double value) { return Tensor({1, 1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  /// Scalar value of a one-element tensor.
  double item() const;

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Elementwise this += other; shapes must match.
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double factor);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace gradkit
