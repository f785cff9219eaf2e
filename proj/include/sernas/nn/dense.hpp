#pragma once

#include <stdexcept>

#include "sernas/ad/ops.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

enum class Activation { none, relu };

// x[B,in] * w[in,out] + b[out], optional ReLU.
template <typename T>
TensorPtr<T> dense(const TensorPtr<T>& x, const TensorPtr<T>& w,
                   const TensorPtr<T>& b, Activation act = Activation::none) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || x->shape[1] != w->shape[0])
    throw std::invalid_argument("dense: input " + ad::shape_str(x->shape) +
                                " incompatible with weights " +
                                ad::shape_str(w->shape));
  auto y = ad::add_rowvec(ad::matmul(x, w), b);
  return act == Activation::relu ? ad::relu(y) : y;
}

}  // namespace sernas::nn
