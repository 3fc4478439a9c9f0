#pragma once

#include "gradkit/param_store.hpp"

namespace gradkit {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Current learning rate of each parameter group.
struct GroupLearningRates {
  double intra_shared = 1e-3;
  double inter = 1e-3;

  double of(ParamGroup group) const {
    return group == ParamGroup::kInter ? inter : intra_shared;
  }
};

/// One bias-corrected Adam update. Only parameters with a gradient slot are
/// touched, and each advances its own step counter.
void adam_step(ParamStore& store, const Gradients& grads, const GroupLearningRates& lr,
               const AdamOptions& options = {});

}  // namespace gradkit
