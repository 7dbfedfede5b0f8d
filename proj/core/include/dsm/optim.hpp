#pragma once

#include "dsm/tensor.hpp"

namespace dsm {

struct AdamOptions {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

/// Bias-corrected Adam update of `param.value` from `param.grad`. The gradient
/// buffer is zeroed afterwards and `step_count` incremented.
void adam_step(Param& param, const AdamOptions& options);

}  // namespace dsm
