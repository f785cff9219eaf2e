#pragma once

// Attentional pooling over a sequence: a class-agnostic bottom-up score per
// timestep is softmax-normalized over valid steps into attention weights; a
// class-specific top-down score per timestep is then pooled with them:
//   logit_c = sum_t attn_t * topdown_{c,t}.
// Both score maps are rank-1 bilinear forms on a shared linear projection.

#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/params.hpp"
#include "sernas/nn/rnn.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

template <typename T>
struct AttentionParams {
  TensorPtr<T> proj_w;  // [in, channels]
  TensorPtr<T> proj_b;  // [channels]
  TensorPtr<T> up_w;    // [channels, 1]   bottom-up
  TensorPtr<T> up_b;    // [1]
  TensorPtr<T> down_w;  // [channels, classes]   top-down
  TensorPtr<T> down_b;  // [classes]
  int channels = 0, classes = 0;
};

template <typename T>
AttentionParams<T> make_attention(ad::ParamSet<T>& ps, const std::string& prefix,
                                  int input, int channels, int classes,
                                  RngStream& rng) {
  if (channels < 1) throw std::invalid_argument("attention: channels must be >= 1");
  AttentionParams<T> a;
  a.channels = channels;
  a.classes = classes;
  a.proj_w = ps.add(prefix + "proj_w", ad::xavier_init<T>({input, channels}, rng));
  a.proj_b = ps.add(prefix + "proj_b", ad::Tensor<T>::zeros({channels}));
  a.up_w = ps.add(prefix + "up_w", ad::xavier_init<T>({channels, 1}, rng));
  a.up_b = ps.add(prefix + "up_b", ad::Tensor<T>::zeros({1}));
  a.down_w = ps.add(prefix + "down_w", ad::xavier_init<T>({channels, classes}, rng));
  a.down_b = ps.add(prefix + "down_b", ad::Tensor<T>::zeros({classes}));
  return a;
}

namespace detail {

// attn[B,T] (weights) x topdown[B,T,C] -> [B,C]
template <typename T>
TensorPtr<T> weighted_time_sum(const TensorPtr<T>& attn, const TensorPtr<T>& td) {
  const int B = attn->shape[0], Tn = attn->shape[1], C = td->shape[2];
  if (td->shape[0] != B || td->shape[1] != Tn)
    throw std::invalid_argument("weighted_time_sum: shape mismatch");
  auto out = ad::make_node<T>({B, C}, {attn, td}, [attn, td, B, Tn, C](
                                                      ad::Tensor<T>& self) {
    if (attn->requires_grad) {
      attn->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < Tn; ++t) {
          T acc = T(0);
          for (int c = 0; c < C; ++c)
            acc += self.grad[static_cast<size_t>(b) * C + c] *
                   td->value[(static_cast<size_t>(b) * Tn + t) * C + c];
          attn->grad[static_cast<size_t>(b) * Tn + t] += acc;
        }
    }
    if (td->requires_grad) {
      td->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < Tn; ++t) {
          const T a = attn->value[static_cast<size_t>(b) * Tn + t];
          for (int c = 0; c < C; ++c)
            td->grad[(static_cast<size_t>(b) * Tn + t) * C + c] +=
                a * self.grad[static_cast<size_t>(b) * C + c];
        }
    }
  });
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < Tn; ++t) {
      const T a = attn->value[static_cast<size_t>(b) * Tn + t];
      for (int c = 0; c < C; ++c)
        out->value[static_cast<size_t>(b) * C + c] +=
            a * td->value[(static_cast<size_t>(b) * Tn + t) * C + c];
    }
  return out;
}

}  // namespace detail

template <typename T>
struct AttentionOut {
  TensorPtr<T> logits;   // [B, classes]
  TensorPtr<T> weights;  // [B, T], rows sum to 1 over valid steps
};

template <typename T>
AttentionOut<T> attention_pool(const SequenceBatch<T>& seq,
                               const AttentionParams<T>& p) {
  using namespace ad;
  seq.validate();
  const int B = seq.batch(), Tn = seq.time(), F = seq.features();
  for (int b = 0; b < B; ++b)
    if (seq.len(b) < 1)
      throw std::invalid_argument("attention_pool: all timesteps masked");

  // Fold time into the batch for the per-timestep linear parts.
  auto flat = reshape(seq.x, {B * Tn, F});
  auto proj = add_rowvec(matmul(flat, p.proj_w), p.proj_b);  // [B*T, ch]
  auto up = reshape(add_rowvec(matmul(proj, p.up_w), p.up_b), {B, Tn});
  auto down = reshape(add_rowvec(matmul(proj, p.down_w), p.down_b),
                      {B, Tn, p.classes});

  std::vector<uint8_t> mask(static_cast<size_t>(B) * Tn);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < Tn; ++t)
      mask[static_cast<size_t>(b) * Tn + t] = t < seq.len(b);

  AttentionOut<T> out;
  out.weights = softmax_lastdim(up, &mask);
  out.logits = detail::weighted_time_sum(out.weights, down);
  return out;
}

}  // namespace sernas::nn
