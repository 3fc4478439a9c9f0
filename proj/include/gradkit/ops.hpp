#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gradkit/tape.hpp"

// Differentiable primitives. Every operand is read as a matrix (see Tensor)
// and every result is rank 2. Reductions take `axis` 0 (collapse rows,
// result 1 x cols) or 1 (collapse columns, result rows x 1).
//
// add/sub/mul broadcast: each dimension of the two operands must either
// match or be 1 in one of them.

namespace gradkit {

Var matmul(Var a, Var b);
/// a * b^T without materializing the transpose.
Var matmul_bt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// 1 - a
Var one_minus(Var a);

Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
/// Rows [begin, end).
Var slice_rows(Var a, std::size_t begin, std::size_t end);
/// Row i of the result is row indices[i] of `a`; repeats accumulate gradient.
Var gather_rows(Var a, std::span<const std::size_t> indices);

Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope);

Var softmax(Var a, int axis);
/// Row-wise softmax over entries where mask(r, c) != 0; masked entries are
/// exactly 0. `mask` is row-major with a's shape and every row must keep
/// at least one entry.
Var masked_softmax(Var a, std::span<const std::uint8_t> mask);

Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a);
Var mean(Var a, int axis);

/// -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] for one-hot y at `target`,
/// with p clamped to [eps, 1 - eps]. Clamped entries pass no gradient.
Var binary_cross_entropy_sum(Var probs, std::size_t target, double eps = 1e-12);
/// -log p_target with p clamped to [eps, 1 - eps].
Var categorical_cross_entropy(Var probs, std::size_t target, double eps = 1e-12);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace gradkit
