#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sernas/ad/tensor.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

// Mean over the batch of -log softmax(logits)[label], stabilized by
// max-subtraction. Fused node: backward is (softmax - onehot)/B.
template <typename T>
TensorPtr<T> softmax_xent(const TensorPtr<T>& logits,
                          const std::vector<int>& labels) {
  if (logits->shape.size() != 2)
    throw std::invalid_argument("softmax_xent: logits must be [batch, classes]");
  const int B = logits->shape[0], C = logits->shape[1];
  if (static_cast<int>(labels.size()) != B)
    throw std::invalid_argument("softmax_xent: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(B));
  for (int y : labels)
    if (y < 0 || y >= C)
      throw std::invalid_argument("softmax_xent: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(C) + ")");

  // probs captured for the backward pass
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(B) * C);
  auto out = ad::make_node<T>({1}, {logits}, [logits, labels, probs, B, C](
                                                 ad::Tensor<T>& self) {
    if (!logits->requires_grad) return;
    logits->ensure_grad();
    const T g = self.grad[0] / static_cast<T>(B);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        T d = static_cast<T>((*probs)[static_cast<size_t>(b) * C + c]);
        if (c == labels[b]) d -= T(1);
        logits->grad[static_cast<size_t>(b) * C + c] += g * d;
      }
  });

  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const T* row = logits->value.data() + static_cast<size_t>(b) * C;
    double mx = static_cast<double>(row[0]);
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double z = 0.0;
    for (int c = 0; c < C; ++c) {
      const double e = std::exp(static_cast<double>(row[c]) - mx);
      (*probs)[static_cast<size_t>(b) * C + c] = e;
      z += e;
    }
    for (int c = 0; c < C; ++c) (*probs)[static_cast<size_t>(b) * C + c] /= z;
    loss -= std::log((*probs)[static_cast<size_t>(b) * C + labels[b]]);
  }
  out->value[0] = static_cast<T>(loss / B);
  return out;
}

}  // namespace sernas::nn
