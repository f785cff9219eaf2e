#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/tensor.hpp"

namespace sernas::ad {

// Adam with bias correction. Moments are keyed by parameter id so a state
// object can serve a whole network while individual steps update only a
// subset (masked path training updates disjoint parameter sets per step).
// Each parameter keeps its own step counter: for a parameter present in
// every step this is exactly the textbook update.
template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  struct Slot {
    std::vector<T> m, v;
    int64_t t = 0;
  };
  std::map<std::string, Slot> slots;

  void step(const std::vector<TensorPtr<T>>& params) { step(params, learning_rate); }

  // Updates params in place from their populated grads, then clears grads.
  void step(const std::vector<TensorPtr<T>>& params, double lr) {
    for (const auto& p : params) {
      if (p->name.empty())
        throw std::invalid_argument("adam: parameter without an id");
      if (!p->has_grad())
        throw std::runtime_error("adam: missing gradient for parameter " + p->name);
      Slot& s = slots[p->name];
      if (s.m.empty()) {
        s.m.assign(p->value.size(), T(0));
        s.v.assign(p->value.size(), T(0));
      }
      if (s.m.size() != p->value.size())
        throw std::runtime_error("adam: state shape mismatch for " + p->name);
      s.t += 1;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
      const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
      for (size_t i = 0; i < p->value.size(); ++i) {
        const T g = p->grad[i];
        s.m[i] = b1 * s.m[i] + (T(1) - b1) * g;
        s.v[i] = b2 * s.v[i] + (T(1) - b2) * g * g;
        const double mhat = static_cast<double>(s.m[i]) / bc1;
        const double vhat = static_cast<double>(s.v[i]) / bc2;
        p->value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + epsilon));
      }
      p->zero_grad();
    }
  }
};

}  // namespace sernas::ad
