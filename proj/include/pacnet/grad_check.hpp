#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pacnet/tensor.hpp"

namespace pacnet {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central finite differences against an analytic gradient, in f64. `loss_fn`
// must recompute the scalar loss from current tensor contents on every call.
// Relative error uses a floored denominator so near-zero gradient entries are
// judged absolutely (at scale eps_floor) instead of blowing up the ratio.
template <typename F>
GradCheckResult finite_difference_check(TensorD& param, const TensorD& analytic,
                                        F&& loss_fn, double eps = 1e-5,
                                        double denom_floor = 1e-3) {
  GradCheckResult r;
  for (std::int64_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + eps;
    const double up = loss_fn();
    param[i] = saved - eps;
    const double down = loss_fn();
    param[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double ana = analytic[i];
    const double abs_err = std::fabs(ana - numeric);
    const double rel_err =
        abs_err / std::max({std::fabs(ana), std::fabs(numeric), denom_floor});
    if (rel_err > r.max_rel_err) {
      r.max_rel_err = rel_err;
      r.worst_index = i;
      r.worst_analytic = ana;
      r.worst_numeric = numeric;
    }
    r.max_abs_err = std::max(r.max_abs_err, abs_err);
  }
  return r;
}

}  // namespace pacnet
