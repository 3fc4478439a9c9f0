#include "gradkit/adam.hpp"

#include <cmath>

namespace gradkit {

void adam_step(ParamStore& store, const Gradients& grads, const GroupLearningRates& lr,
               const AdamOptions& options) {
  if (grads.size() != store.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradient slots for " +
                     std::to_string(store.size()) + " parameters");
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!grads.has(i)) continue;
    Parameter& p = store[i];
    const Tensor& g = grads[i];
    if (g.size() != p.value.size()) {
      throw ShapeError("adam_step: gradient " + shape_string(g.shape()) + " for parameter '" +
                       p.name + "' of shape " + shape_string(p.value.shape()));
    }
    ++p.steps;
    const double step_size = lr.of(p.group);
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(p.steps));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(p.steps));
    for (std::size_t j = 0; j < g.size(); ++j) {
      double& m = p.first_moment[j];
      double& v = p.second_moment[j];
      m = options.beta1 * m + (1.0 - options.beta1) * g[j];
      v = options.beta2 * v + (1.0 - options.beta2) * g[j] * g[j];
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      p.value[j] -= step_size * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

}  // namespace gradkit
