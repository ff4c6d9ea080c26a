#pragma once

#include <cstring>
#include <functional>

#include "dwellrec/param.hpp"
#include "dwellrec/rng.hpp"
#include "dwellrec/tensor.hpp"

namespace dwellrec::test {

inline Tensor2 random_tensor(DetRng& rng, std::size_t rows, std::size_t cols, double lo = -0.5,
                             double hi = 0.5) {
  Tensor2 t(rows, cols);
  for (double& v : t.flat()) v = rng.uniform(lo, hi);
  return t;
}

inline void randomize(Param& p, DetRng& rng, double lo = -0.5, double hi = 0.5) {
  for (double& v : p.value.flat()) v = rng.uniform(lo, hi);
}

// Central finite difference on one coordinate of a tensor, independent of the
// library's own finite_diff_check.
inline double numeric_grad(const std::function<double()>& loss_fn, Tensor2& t, std::size_t i,
                           double eps = 1e-5) {
  double* data = t.data();
  const double saved = data[i];
  data[i] = saved + eps;
  const double lp = loss_fn();
  data[i] = saved - eps;
  const double lm = loss_fn();
  data[i] = saved;
  return (lp - lm) / (2.0 * eps);
}

inline double rel_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

inline bool bitwise_equal(const Tensor2& a, const Tensor2& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace dwellrec::test
