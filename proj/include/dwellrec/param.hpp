#pragma once

#include <cstdint>
#include <string>

#include "dwellrec/tensor.hpp"

namespace dwellrec {

// A trainable tensor with its gradient accumulator and Adam state. Gradients
// accumulate across a batch's forward/backward passes and are consumed
// (zeroed) by adam_step.
struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 m;  // Adam first moment
  Tensor2 v;  // Adam second moment
  std::int64_t step = 0;

  Param() = default;
  Param(std::string param_name, std::size_t rows, std::size_t cols)
      : name(std::move(param_name)),
        value(rows, cols),
        grad(rows, cols),
        m(rows, cols),
        v(rows, cols) {}

  void zero_grad() { grad.set_zero(); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Consumes (zeroes) the gradient and
// increments the step counter.
void adam_step(Param& p, const AdamConfig& cfg = {});

}  // namespace dwellrec
