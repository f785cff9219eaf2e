#pragma once

// Central-difference gradient oracle. Independent of the tape internals: it
// only re-evaluates the given function at perturbed inputs, so it can vet any
// analytic gradient the tape produces.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "sernas/ad/tensor.hpp"

namespace sernas::ad {

// f rebuilds its computation from scratch on each call and returns a scalar
// (plain value, no recorded graph needed). `analytic` is d f / d x at x,
// value-sized. Returns the max over coordinates of
//   |analytic - central| / (|analytic| + |central| + 1e-12).
template <typename T>
double finite_diff_check(const std::function<double(const
                             TensorPtr<T>&)>& f,
                         const TensorPtr<T>& x, const std::vector<T>& analytic,
                         double h) {
  if (analytic.size() != x->value.size())
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  auto probe = x->detach();
  double worst = 0.0;
  for (size_t i = 0; i < x->value.size(); ++i) {
    const T orig = probe->value[i];
    probe->value[i] = orig + static_cast<T>(h);
    const double fp = f(probe);
    probe->value[i] = orig - static_cast<T>(h);
    const double fm = f(probe);
    probe->value[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_check: non-finite function value");
    const double central = (fp - fm) / (2.0 * h);
    const double a = static_cast<double>(analytic[i]);
    const double err =
        std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace sernas::ad
