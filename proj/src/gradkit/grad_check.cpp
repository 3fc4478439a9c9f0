#include "gradkit/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace gradkit {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (const auto& t : point) inputs.push_back(tape.constant(t));
  return f(tape, inputs).value().item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> point, double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> inputs;
    for (const auto& t : point) inputs.push_back(tape.variable(t));
    tape.backward(f(tape, inputs));
    for (const Var& v : inputs) {
      analytic.push_back(v.grad().empty() ? Tensor(v.value().shape()) : v.grad());
    }
  }

  GradCheckResult result;
  result.per_input.assign(point.size(), 0.0);
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t j = 0; j < point[k].size(); ++j) {
      const double original = point[k][j];
      point[k][j] = original + h;
      const double up = evaluate(f, point);
      point[k][j] = original - h;
      const double down = evaluate(f, point);
      point[k][j] = original;
      const double numeric = (up - down) / (2.0 * h);
      result.per_input[k] = std::max(result.per_input[k], relative_error(analytic[k][j], numeric));
    }
    result.max_relative_error = std::max(result.max_relative_error, result.per_input[k]);
  }
  return result;
}

GradCheckResult grad_check_params(ParamStore& store, const std::function<Var(Tape&)>& loss, double h) {
  Gradients analytic;
  {
    Tape tape;
    tape.backward(loss(tape));
    analytic = tape.param_gradients(store);
  }
  auto evaluate_loss = [&] {
    Tape tape;
    return loss(tape).value().item();
  };

  GradCheckResult result;
  result.per_input.assign(store.size(), 0.0);
  for (std::size_t k = 0; k < store.size(); ++k) {
    Tensor& value = store[k].value;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double original = value[j];
      value[j] = original + h;
      const double up = evaluate_loss();
      value[j] = original - h;
      const double down = evaluate_loss();
      value[j] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.has(k) ? analytic[k][j] : 0.0;
      result.per_input[k] = std::max(result.per_input[k], relative_error(a, numeric));
    }
    result.max_relative_error = std::max(result.max_relative_error, result.per_input[k]);
  }
  return result;
}

}  // namespace gradkit
