#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dwellrec/param.hpp"

namespace dwellrec {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tol; }
};

// Verifies the analytic gradients already stored in each param's grad field
// against central finite differences of loss_fn.
//
// loss_fn must be a deterministic forward-only evaluation: it reads the
// current parameter values and returns the loss without touching grads.
// Parameters above 1000 coordinates are checked on a fixed-seed random
// subset of 1000. Relative error is |a - n| / max(|a|, |n|, 1e-8). Throws
// NumericError when loss_fn returns a non-finite value.
GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  std::span<Param* const> params, double eps = 1e-5,
                                  double tol = 1e-4, std::uint64_t sample_seed = 0x5eed);

}  // namespace dwellrec
