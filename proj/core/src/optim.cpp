#include "dsm/optim.hpp"

#include <algorithm>
#include <cmath>

namespace dsm {

void adam_step(Param& p, const AdamOptions& o) {
  p.step_count += 1;
  const Real t = static_cast<Real>(p.step_count);
  const Real c1 = 1 - std::pow(o.beta1, t);
  const Real c2 = 1 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const Real g = p.grad[i];
    p.m1[i] = o.beta1 * p.m1[i] + (1 - o.beta1) * g;
    p.m2[i] = o.beta2 * p.m2[i] + (1 - o.beta2) * g * g;
    const Real m_hat = p.m1[i] / c1;
    const Real v_hat = p.m2[i] / c2;
    p.value[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
  }
  std::fill(p.grad.begin(), p.grad.end(), 0);
}

}  // namespace dsm
