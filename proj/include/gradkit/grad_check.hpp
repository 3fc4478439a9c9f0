#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gradkit/param_store.hpp"
#include "gradkit/tape.hpp"

namespace gradkit {

/// Builds a scalar on `tape` from variables holding the evaluation point.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  /// Worst error per input tensor, aligned with the evaluation point.
  std::vector<double> per_input;
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `f` at `point` against central
/// differences (f(x + h) - f(x - h)) / 2h, coordinate by coordinate.
GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> point, double h = 1e-5);

/// Same check over every parameter of `store`. `loss` must bind parameters
/// with Tape::param. Values in `store` are perturbed in place and restored.
GradCheckResult grad_check_params(ParamStore& store, const std::function<Var(Tape&)>& loss,
                                  double h = 1e-5);

}  // namespace gradkit
