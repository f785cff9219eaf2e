#pragma once

#include <cmath>
#include <stdexcept>

#include "sernas/ad/rng.hpp"
#include "sernas/ad/tensor.hpp"

namespace sernas::ad {

// Glorot-uniform: values drawn from U(-a, a) with a = sqrt(6/(fan_in+fan_out)).
template <typename T>
TensorPtr<T> xavier_init_fans(Shape shape, RngStream& rng, int64_t fan_in,
                              int64_t fan_out) {
  if (shape.empty()) throw std::invalid_argument("xavier: empty shape");
  for (int d : shape)
    if (d <= 0)
      throw std::invalid_argument("xavier: zero-sized dimension in " + shape_str(shape));
  if (fan_in <= 0 || fan_out <= 0)
    throw std::invalid_argument("xavier: fans must be positive");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  auto t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t->value) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

// Fan convention:
//   rank 1 [n]              -> fan_in = fan_out = n
//   rank 2 [in, out]        -> (in, out)
//   rank 4 [co, ci, kh, kw] -> (ci*kh*kw, co*kh*kw)   (receptive-field area)
// Other ranks need explicit fans via xavier_init_fans.
template <typename T>
TensorPtr<T> xavier_init(Shape shape, RngStream& rng) {
  if (shape.empty()) throw std::invalid_argument("xavier: empty shape");
  int64_t fi = 0, fo = 0;
  switch (shape.size()) {
    case 1:
      fi = fo = shape[0];
      break;
    case 2:
      fi = shape[0];
      fo = shape[1];
      break;
    case 4:
      fi = static_cast<int64_t>(shape[1]) * shape[2] * shape[3];
      fo = static_cast<int64_t>(shape[0]) * shape[2] * shape[3];
      break;
    default:
      throw std::invalid_argument("xavier: no fan convention for rank " +
                                  std::to_string(shape.size()));
  }
  return xavier_init_fans<T>(std::move(shape), rng, fi, fo);
}

}  // namespace sernas::ad
