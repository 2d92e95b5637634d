#pragma once

#include <cmath>
#include <functional>

#include "matforge/tensor.hpp"

namespace matforge {

// Central finite differences against an analytic gradient, double precision.
// `loss` must re-evaluate the scalar objective from the current contents of
// `values`; the tensor is restored before returning.
inline double check_gradient(TensorD& values, const TensorD& analytic, const std::function<double()>& loss,
                             double eps = 1e-5) {
  double max_rel = 0.0;
  for (std::int64_t i = 0; i < values.numel(); ++i) {
    const double orig = values[i];
    values[i] = orig + eps;
    const double lp = loss();
    values[i] = orig - eps;
    const double lm = loss();
    values[i] = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm)) throw StateError("gradient check: non-finite loss");
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace matforge
