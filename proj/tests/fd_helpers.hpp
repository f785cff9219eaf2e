#pragma once

// Drives the central-difference oracle against the tape gradient of one
// tensor inside an arbitrarily composed graph. `build` must reconstruct the
// full forward computation from current tensor values and return the scalar
// loss node.

#include <functional>

#include "sernas/ad/finite_diff.hpp"
#include "sernas/ad/tensor.hpp"

namespace fdtest {

template <typename Build>
double fd_param(const sernas::ad::TensorPtr<double>& target, Build build,
                double h = 1e-5) {
  using namespace sernas::ad;
  const bool had_rg = target->requires_grad;
  target->requires_grad = true;
  target->ensure_grad();
  target->zero_grad();
  auto loss = build();
  backward(loss);
  auto analytic = target->grad;
  target->zero_grad();
  target->requires_grad = had_rg;

  std::function<double(const TensorPtr<double>&)> f =
      [&](const TensorPtr<double>& probe) {
        NoGradGuard guard;
        auto saved = target->value;
        target->value = probe->value;
        const double v = static_cast<double>(build()->value[0]);
        target->value = saved;
        return v;
      };
  return finite_diff_check<double>(f, target, analytic, h);
}

}  // namespace fdtest
