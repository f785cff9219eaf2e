#pragma once

// 2-D convolution and max pooling on [batch, channels, time, freq] maps.
// Valid padding, stride 1 convolution; non-overlapping pooling with trailing
// remainder truncated.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sernas/ad/ops.hpp"
#include "sernas/ad/tensor.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

// x[B,Ci,H,W], w[Co,Ci,kh,kw], b[Co] -> [B,Co,H-kh+1,W-kw+1].
// Bias per output channel; optional fused ReLU.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b, bool relu_after = true) {
  if (x->shape.size() != 4 || w->shape.size() != 4)
    throw std::invalid_argument("conv2d: need rank-4 input and kernel, got " +
                                ad::shape_str(x->shape) + " and " +
                                ad::shape_str(w->shape));
  const int B = x->shape[0], Ci = x->shape[1], H = x->shape[2], W = x->shape[3];
  const int Co = w->shape[0], kh = w->shape[2], kw = w->shape[3];
  if (w->shape[1] != Ci)
    throw std::invalid_argument("conv2d: kernel expects " +
                                std::to_string(w->shape[1]) + " input channels, input has " +
                                std::to_string(Ci));
  if (kh > H || kw > W)
    throw std::invalid_argument("conv2d: kernel " + ad::shape_str(w->shape) +
                                " larger than input " + ad::shape_str(x->shape));
  if (b->shape.size() != 1 || b->shape[0] != Co)
    throw std::invalid_argument("conv2d: bias shape " + ad::shape_str(b->shape) +
                                " does not match " + std::to_string(Co) + " channels");
  const int OH = H - kh + 1, OW = W - kw + 1;

  auto out = ad::make_node<T>(
      {B, Co, OH, OW}, {x, w, b},
      [x, w, b, B, Ci, H, W, Co, kh, kw, OH, OW, relu_after](Tensor<T>& self) {
        const bool gx = x->requires_grad, gw = w->requires_grad,
                   gb = b->requires_grad;
        if (gx) x->ensure_grad();
        if (gw) w->ensure_grad();
        if (gb) b->ensure_grad();
        for (int bi = 0; bi < B; ++bi)
          for (int co = 0; co < Co; ++co) {
            const int64_t obase = ((static_cast<int64_t>(bi) * Co + co) * OH) * OW;
            for (int oy = 0; oy < OH; ++oy)
              for (int ox = 0; ox < OW; ++ox) {
                T g = self.grad[obase + static_cast<int64_t>(oy) * OW + ox];
                if (relu_after &&
                    self.value[obase + static_cast<int64_t>(oy) * OW + ox] <= T(0))
                  g = T(0);
                if (g == T(0)) continue;
                if (gb) b->grad[co] += g;
                for (int ci = 0; ci < Ci; ++ci) {
                  const int64_t xbase =
                      ((static_cast<int64_t>(bi) * Ci + ci) * H + oy) * W + ox;
                  const int64_t wbase =
                      ((static_cast<int64_t>(co) * Ci + ci) * kh) * kw;
                  for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                      const int64_t xi = xbase + static_cast<int64_t>(ky) * W + kx;
                      const int64_t wi = wbase + static_cast<int64_t>(ky) * kw + kx;
                      if (gw) w->grad[wi] += g * x->value[xi];
                      if (gx) x->grad[xi] += g * w->value[wi];
                    }
                }
              }
          }
      });

  for (int bi = 0; bi < B; ++bi)
    for (int co = 0; co < Co; ++co) {
      const T bias = b->value[co];
      const int64_t obase = ((static_cast<int64_t>(bi) * Co + co) * OH) * OW;
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          T acc = bias;
          for (int ci = 0; ci < Ci; ++ci) {
            const int64_t xbase =
                ((static_cast<int64_t>(bi) * Ci + ci) * H + oy) * W + ox;
            const int64_t wbase = ((static_cast<int64_t>(co) * Ci + ci) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const T* xr = x->value.data() + xbase + static_cast<int64_t>(ky) * W;
              const T* wr = w->value.data() + wbase + static_cast<int64_t>(ky) * kw;
              for (int kx = 0; kx < kw; ++kx) acc += xr[kx] * wr[kx];
            }
          }
          if (relu_after && acc < T(0)) acc = T(0);
          out->value[obase + static_cast<int64_t>(oy) * OW + ox] = acc;
        }
    }
  return out;
}

// Non-overlapping max pooling with window (wh, ww); output dims are
// floor-divided, trailing remainder rows/cols are dropped.
template <typename T>
TensorPtr<T> maxpool2d(const TensorPtr<T>& x, int wh, int ww) {
  if (x->shape.size() != 4)
    throw std::invalid_argument("maxpool2d: need rank-4, got " +
                                ad::shape_str(x->shape));
  if (wh < 1 || ww < 1)
    throw std::invalid_argument("maxpool2d: window must be positive, got " +
                                std::to_string(wh) + "x" + std::to_string(ww));
  const int B = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
  if (wh > H || ww > W)
    throw std::invalid_argument("maxpool2d: window " + std::to_string(wh) + "x" +
                                std::to_string(ww) + " exceeds input " +
                                ad::shape_str(x->shape));
  const int OH = H / wh, OW = W / ww;

  // argmax indices into x, captured for the backward scatter
  auto arg = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(B) * C * OH * OW);
  auto out = ad::make_node<T>({B, C, OH, OW}, {x}, [x, arg](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      x->grad[(*arg)[i]] += self.grad[i];
  });

  int64_t oi = 0;
  for (int bi = 0; bi < B; ++bi)
    for (int ci = 0; ci < C; ++ci) {
      const int64_t xbase = (static_cast<int64_t>(bi) * C + ci) * H * W;
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox, ++oi) {
          int64_t best = xbase + static_cast<int64_t>(oy) * wh * W + ox * ww;
          T bv = x->value[best];
          for (int dy = 0; dy < wh; ++dy)
            for (int dx = 0; dx < ww; ++dx) {
              const int64_t idx =
                  xbase + (static_cast<int64_t>(oy) * wh + dy) * W + ox * ww + dx;
              if (x->value[idx] > bv) {
                bv = x->value[idx];
                best = idx;
              }
            }
          out->value[oi] = bv;
          (*arg)[oi] = best;
        }
    }
  return out;
}

// Mean over the time axis of [B,C,T,F], flattened to [B, C*F]. Keeps the
// head length-agnostic over time.
template <typename T>
TensorPtr<T> mean_time_flatten(const TensorPtr<T>& x) {
  if (x->shape.size() != 4)
    throw std::invalid_argument("mean_time_flatten: need rank-4, got " +
                                ad::shape_str(x->shape));
  const int B = x->shape[0], C = x->shape[1], Tm = x->shape[2], F = x->shape[3];
  auto out = ad::make_node<T>({B, C * F}, {x}, [x, B, C, Tm, F](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    const T inv = T(1) / static_cast<T>(Tm);
    for (int bi = 0; bi < B; ++bi)
      for (int ci = 0; ci < C; ++ci)
        for (int t = 0; t < Tm; ++t)
          for (int f = 0; f < F; ++f)
            x->grad[((static_cast<int64_t>(bi) * C + ci) * Tm + t) * F + f] +=
                inv * self.grad[static_cast<int64_t>(bi) * C * F + ci * F + f];
  });
  const T inv = T(1) / static_cast<T>(Tm);
  for (int bi = 0; bi < B; ++bi)
    for (int ci = 0; ci < C; ++ci)
      for (int f = 0; f < F; ++f) {
        T acc = T(0);
        for (int t = 0; t < Tm; ++t)
          acc += x->value[((static_cast<int64_t>(bi) * C + ci) * Tm + t) * F + f];
        out->value[static_cast<int64_t>(bi) * C * F + ci * F + f] = acc * inv;
      }
  return out;
}

// [B,C,T,F] -> [B,T,C*F]: one feature vector per time step.
template <typename T>
TensorPtr<T> to_sequence(const TensorPtr<T>& x) {
  if (x->shape.size() != 4)
    throw std::invalid_argument("to_sequence: need rank-4, got " +
                                ad::shape_str(x->shape));
  const int B = x->shape[0], C = x->shape[1], Tm = x->shape[2], F = x->shape[3];
  auto out = ad::make_node<T>({B, Tm, C * F}, {x}, [x, B, C, Tm, F](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int bi = 0; bi < B; ++bi)
      for (int ci = 0; ci < C; ++ci)
        for (int t = 0; t < Tm; ++t)
          for (int f = 0; f < F; ++f)
            x->grad[((static_cast<int64_t>(bi) * C + ci) * Tm + t) * F + f] +=
                self.grad[(static_cast<int64_t>(bi) * Tm + t) * C * F + ci * F + f];
  });
  for (int bi = 0; bi < B; ++bi)
    for (int ci = 0; ci < C; ++ci)
      for (int t = 0; t < Tm; ++t)
        for (int f = 0; f < F; ++f)
          out->value[(static_cast<int64_t>(bi) * Tm + t) * C * F + ci * F + f] =
              x->value[((static_cast<int64_t>(bi) * C + ci) * Tm + t) * F + f];
  return out;
}

}  // namespace sernas::nn
