#include "dwellrec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dwellrec/errors.hpp"
#include "dwellrec/rng.hpp"

namespace dwellrec {

namespace {

constexpr std::size_t kMaxCoordsPerParam = 1000;

double checked_loss(const std::function<double()>& loss_fn) {
  const double loss = loss_fn();
  if (!std::isfinite(loss)) {
    throw NumericError("finite_diff_check: loss_fn returned a non-finite value");
  }
  return loss;
}

}  // namespace

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss_fn,
                                  std::span<Param* const> params, double eps, double tol,
                                  std::uint64_t sample_seed) {
  GradCheckReport report;
  report.tol = tol;
  checked_loss(loss_fn);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    const std::size_t n = p->value.size();

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > kMaxCoordsPerParam) {
      DetRng rng(derive_seed(sample_seed, pi));
      rng.shuffle(coords);
      coords.resize(kMaxCoordsPerParam);
      std::sort(coords.begin(), coords.end());
    }

    GradCheckEntry entry;
    entry.name = p->name;
    entry.coords_checked = coords.size();
    double* value = p->value.data();
    const double* grad = p->grad.data();
    for (std::size_t i : coords) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double lp = checked_loss(loss_fn);
      value[i] = saved - eps;
      const double lm = checked_loss(loss_fn);
      value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double analytic = grad[i];
      const double rel =
          std::fabs(analytic - numeric) /
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace dwellrec
