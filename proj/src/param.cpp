#include "dwellrec/param.hpp"

#include <cmath>

#include "dwellrec/errors.hpp"

namespace dwellrec {

void adam_step(Param& p, const AdamConfig& cfg) {
  if (!p.value.same_shape(p.grad) || !p.value.same_shape(p.m) || !p.value.same_shape(p.v)) {
    throw ShapeError("adam_step: value/grad/moment shapes differ for " + p.name);
  }
  p.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));

  double* value = p.value.data();
  double* grad = p.grad.data();
  double* m = p.m.data();
  double* v = p.v.data();
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    grad[i] = 0.0;
  }
}

}  // namespace dwellrec
