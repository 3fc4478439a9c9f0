#include "gradkit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace gradkit {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap view(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
}

void check_axis(const char* op, int axis) {
  if (axis != 0 && axis != 1) {
    throw ShapeError(std::string(op) + ": axis must be 0 or 1, got " + std::to_string(axis));
  }
}

// Broadcast output dimension for one axis, or 0 when incompatible.
std::size_t broadcast_dim(std::size_t a, std::size_t b) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  return 0;
}

// Sums `g` (rows x cols) down to the operand shape `target` it was broadcast from.
Tensor reduce_to(const Tensor& g, const Tensor& target) {
  if (g.rows() == target.rows() && g.cols() == target.cols()) {
    return Tensor({target.rows(), target.cols()}, std::vector<double>(g.values().begin(), g.values().end()));
  }
  Tensor out = Tensor::matrix(target.rows(), target.cols());
  const std::size_t tr = target.rows(), tc = target.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      out(tr == 1 ? 0 : r, tc == 1 ? 0 : c) += g(r, c);
    }
  }
  return out;
}

enum class Binary { kAdd, kSub, kMul };

Var binary(const char* op, Binary kind, Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = broadcast_dim(av.rows(), bv.rows());
  const std::size_t cols = broadcast_dim(av.cols(), bv.cols());
  if (rows == 0 || cols == 0) shape_mismatch(op, av, bv);

  Tensor out = Tensor::matrix(rows, cols);
  const bool ar = av.rows() == 1, ac = av.cols() == 1, br = bv.rows() == 1, bc = bv.cols() == 1;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = av(ar ? 0 : r, ac ? 0 : c);
      const double y = bv(br ? 0 : r, bc ? 0 : c);
      out(r, c) = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
    }
  }
  return a.tape().record(op, std::move(out), {a, b}, [a, b, kind](Tape& tape, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (kind == Binary::kMul) {
      const bool ar = av.rows() == 1, ac = av.cols() == 1, br = bv.rows() == 1, bc = bv.cols() == 1;
      if (tape.requires_grad(a)) {
        Tensor ga = Tensor::matrix(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = g(r, c) * bv(br ? 0 : r, bc ? 0 : c);
        tape.accumulate_grad(a, reduce_to(ga, av));
      }
      if (tape.requires_grad(b)) {
        Tensor gb = Tensor::matrix(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb(r, c) = g(r, c) * av(ar ? 0 : r, ac ? 0 : c);
        tape.accumulate_grad(b, reduce_to(gb, bv));
      }
      return;
    }
    if (tape.requires_grad(a)) tape.accumulate_grad(a, reduce_to(g, av));
    if (tape.requires_grad(b)) {
      Tensor gb = reduce_to(g, bv);
      if (kind == Binary::kSub) gb *= -1.0;
      tape.accumulate_grad(b, gb);
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      view(tape.grad_buffer(a)).noalias() += view(g) * view(b.value()).transpose();
    }
    if (tape.requires_grad(b)) {
      view(tape.grad_buffer(b)).noalias() += view(a.value()).transpose() * view(g);
    }
  });
}

Var matmul_bt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) shape_mismatch("matmul_bt", av, bv);
  Tensor out = Tensor::matrix(av.rows(), bv.rows());
  view(out).noalias() = view(av) * view(bv).transpose();
  return a.tape().record("matmul_bt", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      view(tape.grad_buffer(a)).noalias() += view(g) * view(b.value());
    }
    if (tape.requires_grad(b)) {
      view(tape.grad_buffer(b)).noalias() += view(g).transpose() * view(a.value());
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.cols(), av.rows());
  view(out) = view(av).transpose();
  return a.tape().record("transpose", std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    view(tape.grad_buffer(a)) += view(g).transpose();
  });
}

Var add(Var a, Var b) { return binary("add", Binary::kAdd, a, b); }
Var sub(Var a, Var b) { return binary("sub", Binary::kSub, a, b); }
Var mul(Var a, Var b) { return binary("mul", Binary::kMul, a, b); }

Var scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return a.tape().record("scale", std::move(out), {a}, [a, factor](Tape& tape, const Tensor& g) {
    view(tape.grad_buffer(a)) += factor * view(g);
  });
}

Var add_scalar(Var a, double offset) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + offset;
  return a.tape().record("add_scalar", std::move(out), {a}, [a](Tape& tape, const Tensor& g) {
    view(tape.grad_buffer(a)) += view(g);
  });
}

Var one_minus(Var a) { return add_scalar(scale(a, -1.0), 1.0); }

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  check_axis("concat", axis);
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = parts[0].value();
  std::size_t rows = first.rows(), cols = first.cols();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Tensor& p = parts[i].value();
    if (axis == 0) {
      if (p.cols() != cols) shape_mismatch("concat(axis=0)", first, p);
      rows += p.rows();
    } else {
      if (p.rows() != rows) shape_mismatch("concat(axis=1)", first, p);
      cols += p.cols();
    }
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& part : parts) {
    const Tensor& p = part.value();
    if (axis == 0) {
      view(out).block(offset, 0, p.rows(), cols) = view(p);
      offset += p.rows();
    } else {
      view(out).block(0, offset, rows, p.cols()) = view(p);
      offset += p.cols();
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(
      "concat", std::move(out), parts, [inputs, axis](Tape& tape, const Tensor& g) {
        std::size_t offset = 0;
        for (const Var& part : inputs) {
          const std::size_t pr = part.rows(), pc = part.cols();
          if (tape.requires_grad(part)) {
            if (axis == 0) {
              view(tape.grad_buffer(part)) += view(g).block(offset, 0, pr, pc);
            } else {
              view(tape.grad_buffer(part)) += view(g).block(0, offset, pr, pc);
            }
          }
          offset += axis == 0 ? pr : pc;
        }
      });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin >= end || end > av.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + dims(av));
  }
  Tensor out = Tensor::matrix(end - begin, av.cols());
  view(out) = view(av).middleRows(begin, end - begin);
  return a.tape().record("slice_rows", std::move(out), {a}, [a, begin, end](Tape& tape, const Tensor& g) {
    view(tape.grad_buffer(a)).middleRows(begin, end - begin) += view(g);
  });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor out = Tensor::matrix(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " + dims(av));
    }
    std::copy_n(av.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return a.tape().record("gather_rows", std::move(out), {a}, [a, idx](Tape& tape, const Tensor& g) {
    Tensor& buf = tape.grad_buffer(a);
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = buf.data() + idx[i] * cols;
      const double* src = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var sigmoid(Var a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    // Split by sign so exp never overflows.
    out[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  Tensor y = out;
  return a.tape().record("sigmoid", std::move(out), {a}, [a, y = std::move(y)](Tape& tape, const Tensor& g) {
    Tensor& buf = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
  Tensor y = out;
  return a.tape().record("tanh", std::move(out), {a}, [a, y = std::move(y)](Tape& tape, const Tensor& g) {
    Tensor& buf = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var leaky_relu(Var a, double slope) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] >= 0 ? av[i] : slope * av[i];
  return a.tape().record("leaky_relu", std::move(out), {a}, [a, slope](Tape& tape, const Tensor& g) {
    const Tensor& av = a.value();
    Tensor& buf = tape.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * (av[i] >= 0 ? 1.0 : slope);
  });
}

namespace {

// Shared backward for row-wise softmax: dx = y * (g - sum(g * y)).
void softmax_rows_backward(Tape& tape, Var a, const Tensor& y, const Tensor& g) {
  Tensor& buf = tape.grad_buffer(a);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) buf(r, c) += y(r, c) * (g(r, c) - dot);
  }
}

}  // namespace

Var softmax(Var a, int axis) {
  check_axis("softmax", axis);
  if (axis == 0) return transpose(softmax(transpose(a), 1));
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double peak = av(r, 0);
    for (std::size_t c = 1; c < av.cols(); ++c) peak = std::max(peak, av(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) total += out(r, c) = std::exp(av(r, c) - peak);
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= total;
  }
  Tensor y = out;
  return a.tape().record("softmax", std::move(out), {a}, [a, y = std::move(y)](Tape& tape, const Tensor& g) {
    softmax_rows_backward(tape, a, y, g);
  });
}

Var masked_softmax(Var a, std::span<const std::uint8_t> mask) {
  const Tensor& av = a.value();
  if (mask.size() != av.size()) {
    throw ShapeError("masked_softmax: mask of " + std::to_string(mask.size()) + " entries for " + dims(av));
  }
  const std::size_t cols = av.cols();
  Tensor out = Tensor::matrix(av.rows(), cols);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const std::uint8_t* m = mask.data() + r * cols;
    double peak = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c)
      if (m[c]) peak = std::max(peak, av(r, c));
    if (peak == -INFINITY) {
      throw ShapeError("masked_softmax: row " + std::to_string(r) + " has no unmasked entry");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      if (m[c]) total += out(r, c) = std::exp(av(r, c) - peak);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= total;
  }
  Tensor y = out;
  // Masked outputs are identically 0, so y * (g - <g, y>) already vanishes there.
  return a.tape().record("masked_softmax", std::move(out), {a}, [a, y = std::move(y)](Tape& tape, const Tensor& g) {
    softmax_rows_backward(tape, a, y, g);
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double total = 0.0;
  for (double v : av.values()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [a](Tape& tape, const Tensor& g) {
    Tensor& buf = tape.grad_buffer(a);
    const double s = g[0];
    for (double& v : buf.values()) v += s;
  });
}

Var sum(Var a, int axis) {
  check_axis("sum", axis);
  const Tensor& av = a.value();
  Tensor out = axis == 0 ? Tensor::matrix(1, av.cols()) : Tensor::matrix(av.rows(), 1);
  if (axis == 0) {
    view(out) = view(av).colwise().sum();
  } else {
    view(out) = view(av).rowwise().sum();
  }
  return a.tape().record("sum", std::move(out), {a}, [a, axis](Tape& tape, const Tensor& g) {
    Tensor& buf = tape.grad_buffer(a);
    for (std::size_t r = 0; r < buf.rows(); ++r)
      for (std::size_t c = 0; c < buf.cols(); ++c) buf(r, c) += axis == 0 ? g(0, c) : g(r, 0);
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean(Var a, int axis) {
  check_axis("mean", axis);
  const double n = static_cast<double>(axis == 0 ? a.rows() : a.cols());
  return scale(sum(a, axis), 1.0 / n);
}

namespace {

void check_target(const char* op, const Tensor& p, std::size_t target) {
  if (p.rows() != 1) throw ShapeError(std::string(op) + ": expected a 1xN row, got " + dims(p));
  if (target >= p.cols()) {
    throw std::out_of_range(std::string(op) + ": target " + std::to_string(target) +
                            " out of range for " + std::to_string(p.cols()) + " classes");
  }
}

}  // namespace

Var binary_cross_entropy_sum(Var probs, std::size_t target, double eps) {
  const Tensor& p = probs.value();
  check_target("binary_cross_entropy_sum", p, target);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.cols(); ++i) {
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    loss -= i == target ? std::log(q) : std::log(1.0 - q);
  }
  return probs.tape().record(
      "binary_cross_entropy_sum", Tensor::scalar(loss), {probs},
      [probs, target, eps](Tape& tape, const Tensor& g) {
        const Tensor& p = probs.value();
        Tensor& buf = tape.grad_buffer(probs);
        for (std::size_t i = 0; i < p.cols(); ++i) {
          if (p[i] < eps || p[i] > 1.0 - eps) continue;
          buf[i] += g[0] * (i == target ? -1.0 / p[i] : 1.0 / (1.0 - p[i]));
        }
      });
}

Var categorical_cross_entropy(Var probs, std::size_t target, double eps) {
  const Tensor& p = probs.value();
  check_target("categorical_cross_entropy", p, target);
  const double q = std::clamp(p[target], eps, 1.0 - eps);
  return probs.tape().record(
      "categorical_cross_entropy", Tensor::scalar(-std::log(q)), {probs},
      [probs, target, eps](Tape& tape, const Tensor& g) {
        const double pt = probs.value()[target];
        if (pt < eps || pt > 1.0 - eps) return;
        tape.grad_buffer(probs)[target] -= g[0] / pt;
      });
}

}  // namespace gradkit
