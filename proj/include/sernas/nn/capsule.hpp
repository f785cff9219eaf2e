#pragma once

// Sequential capsule stage: primary capsules come from 8 parallel 1x1
// convolution heads over the CNN output (one fused conv with 8*8 output
// channels, grouped by head). Each time window is routed to 8 window-level
// capsules of size 8; a second, window-shared routing over all window
// outputs produces 4 utterance-level capsules of size 16.
//
// Dynamic routing (per window / utterance level):
//   b = 0
//   repeat iters: c = softmax_j(b); s_j = sum_i c_ij u_hat_ij;
//                 v_j = squash(s_j); b_ij += u_hat_ij . v_j
// squash(s) = (|s|^2 / (1+|s|^2)) * s/|s|, which keeps |v| < 1.
// Gradients flow through the full routing computation.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/params.hpp"
#include "sernas/nn/conv.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

enum class CapsuleLevel { window, utterance };

template <typename T>
struct CapsuleSet {
  TensorPtr<T> caps;  // [B, num_capsules, capsule_dim]
  CapsuleLevel level = CapsuleLevel::window;
};

// Optional test hook: coupling coefficients per routing iteration.
template <typename T>
struct RoutingTrace {
  std::vector<TensorPtr<T>> couplings;  // each [B, I, J]
};

namespace caps_detail {

// u[B,I,D], w[G,J,O,D] with the transform of input capsule i taken from
// group i % G  ->  u_hat[B,I,J,O].
template <typename T>
TensorPtr<T> caps_transform(const TensorPtr<T>& u, const TensorPtr<T>& w) {
  const int B = u->shape[0], I = u->shape[1], D = u->shape[2];
  const int G = w->shape[0], J = w->shape[1], O = w->shape[2];
  if (w->shape[3] != D || I % G != 0)
    throw std::invalid_argument("caps_transform: incompatible shapes " +
                                ad::shape_str(u->shape) + " and " +
                                ad::shape_str(w->shape));
  auto out = ad::make_node<T>({B, I, J, O}, {u, w}, [u, w, B, I, D, G, J, O](
                                                        ad::Tensor<T>& self) {
    const bool gu = u->requires_grad, gw = w->requires_grad;
    if (gu) u->ensure_grad();
    if (gw) w->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < I; ++i) {
        const int g = i % G;
        const int64_t ubase = (static_cast<int64_t>(b) * I + i) * D;
        for (int j = 0; j < J; ++j)
          for (int o = 0; o < O; ++o) {
            const T go = self.grad[((static_cast<int64_t>(b) * I + i) * J + j) * O + o];
            if (go == T(0)) continue;
            const int64_t wbase = ((static_cast<int64_t>(g) * J + j) * O + o) * D;
            for (int d = 0; d < D; ++d) {
              if (gw) w->grad[wbase + d] += go * u->value[ubase + d];
              if (gu) u->grad[ubase + d] += go * w->value[wbase + d];
            }
          }
      }
  });
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < I; ++i) {
      const int g = i % G;
      const int64_t ubase = (static_cast<int64_t>(b) * I + i) * D;
      for (int j = 0; j < J; ++j)
        for (int o = 0; o < O; ++o) {
          const int64_t wbase = ((static_cast<int64_t>(g) * J + j) * O + o) * D;
          T acc = T(0);
          for (int d = 0; d < D; ++d)
            acc += w->value[wbase + d] * u->value[ubase + d];
          out->value[((static_cast<int64_t>(b) * I + i) * J + j) * O + o] = acc;
        }
    }
  return out;
}

// c[B,I,J] x u_hat[B,I,J,O] -> s[B,J,O]
template <typename T>
TensorPtr<T> route_weighted_sum(const TensorPtr<T>& c, const TensorPtr<T>& uh) {
  const int B = c->shape[0], I = c->shape[1], J = c->shape[2], O = uh->shape[3];
  auto out = ad::make_node<T>({B, J, O}, {c, uh}, [c, uh, B, I, J, O](
                                                      ad::Tensor<T>& self) {
    const bool gc = c->requires_grad, gu = uh->requires_grad;
    if (gc) c->ensure_grad();
    if (gu) uh->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) {
          const int64_t ub = ((static_cast<int64_t>(b) * I + i) * J + j) * O;
          const int64_t sb = (static_cast<int64_t>(b) * J + j) * O;
          const T cv = c->value[(static_cast<int64_t>(b) * I + i) * J + j];
          T acc = T(0);
          for (int o = 0; o < O; ++o) {
            acc += self.grad[sb + o] * uh->value[ub + o];
            if (gu) uh->grad[ub + o] += cv * self.grad[sb + o];
          }
          if (gc) c->grad[(static_cast<int64_t>(b) * I + i) * J + j] += acc;
        }
  });
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) {
        const int64_t ub = ((static_cast<int64_t>(b) * I + i) * J + j) * O;
        const int64_t sb = (static_cast<int64_t>(b) * J + j) * O;
        const T cv = c->value[(static_cast<int64_t>(b) * I + i) * J + j];
        for (int o = 0; o < O; ++o) out->value[sb + o] += cv * uh->value[ub + o];
      }
  return out;
}

// u_hat[B,I,J,O] . v[B,J,O] -> agreement[B,I,J]
template <typename T>
TensorPtr<T> route_agreement(const TensorPtr<T>& uh, const TensorPtr<T>& v) {
  const int B = uh->shape[0], I = uh->shape[1], J = uh->shape[2], O = uh->shape[3];
  auto out = ad::make_node<T>({B, I, J}, {uh, v}, [uh, v, B, I, J, O](
                                                      ad::Tensor<T>& self) {
    const bool gu = uh->requires_grad, gv = v->requires_grad;
    if (gu) uh->ensure_grad();
    if (gv) v->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) {
          const T g = self.grad[(static_cast<int64_t>(b) * I + i) * J + j];
          if (g == T(0)) continue;
          const int64_t ub = ((static_cast<int64_t>(b) * I + i) * J + j) * O;
          const int64_t vb = (static_cast<int64_t>(b) * J + j) * O;
          for (int o = 0; o < O; ++o) {
            if (gu) uh->grad[ub + o] += g * v->value[vb + o];
            if (gv) v->grad[vb + o] += g * uh->value[ub + o];
          }
        }
  });
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) {
        const int64_t ub = ((static_cast<int64_t>(b) * I + i) * J + j) * O;
        const int64_t vb = (static_cast<int64_t>(b) * J + j) * O;
        T acc = T(0);
        for (int o = 0; o < O; ++o) acc += uh->value[ub + o] * v->value[vb + o];
        out->value[(static_cast<int64_t>(b) * I + i) * J + j] = acc;
      }
  return out;
}

// Head conv output x[B, H*D, T, F], window [t0, t0+win) on the time axis ->
// primary capsules [B, H*win*F, D]; positions past T contribute zeros.
template <typename T>
TensorPtr<T> gather_window(const TensorPtr<T>& x, int t0, int win, int D) {
  const int B = x->shape[0], HD = x->shape[1], Tn = x->shape[2], F = x->shape[3];
  if (HD % D != 0)
    throw std::invalid_argument("gather_window: channels not divisible by capsule dim");
  const int H = HD / D;
  const int I = H * win * F;
  auto out = ad::make_node<T>({B, I, D}, {x}, [x, t0, win, D, B, H, Tn, F](
                                                   ad::Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int h = 0; h < H; ++h)
        for (int tau = 0; tau < win; ++tau) {
          const int t = t0 + tau;
          if (t >= Tn) continue;
          for (int f = 0; f < F; ++f) {
            const int i = (h * win + tau) * F + f;
            for (int d = 0; d < D; ++d)
              x->grad[((static_cast<int64_t>(b) * (H * D) + h * D + d) * Tn + t) * F + f] +=
                  self.grad[((static_cast<int64_t>(b) * (H * win * F)) + i) *
                                static_cast<int64_t>(D) + d];
          }
        }
  });
  for (int b = 0; b < B; ++b)
    for (int h = 0; h < H; ++h)
      for (int tau = 0; tau < win; ++tau) {
        const int t = t0 + tau;
        if (t >= Tn) continue;
        for (int f = 0; f < F; ++f) {
          const int i = (h * win + tau) * F + f;
          for (int d = 0; d < D; ++d)
            out->value[((static_cast<int64_t>(b) * (H * win * F)) + i) *
                           static_cast<int64_t>(D) + d] =
                x->value[((static_cast<int64_t>(b) * (H * D) + h * D + d) * Tn + t) * F + f];
        }
      }
  return out;
}

}  // namespace caps_detail

// squash along the last (capsule) dim via composed primitives, so gradients
// are exact by construction.
template <typename T>
TensorPtr<T> squash_lastdim(const TensorPtr<T>& s) {
  using namespace ad;
  auto n2 = reduce_sum_lastdim(mul(s, s));
  // factor g(n2) = n2 / ((1+n2) sqrt(n2+eps))
  const T eps = static_cast<T>(1e-12);
  auto factor = unary(
      n2,
      [eps](T v) {
        return v / ((T(1) + v) * std::sqrt(v + eps));
      },
      [eps](T v, T) {
        const T r = std::sqrt(v + eps);
        const T d = (T(1) + v) * r;
        // d/dv [ v / ((1+v) sqrt(v+eps)) ]
        const T num = d - v * (r + (T(1) + v) / (T(2) * r));
        return num / (d * d);
      });
  return mul_bcast_lastdim(s, factor);
}

// One routing level: u[B,I,D] -> J capsules of size O. w has G groups of
// per-pair transforms (G == I for position-specific, G < I for shared).
template <typename T>
TensorPtr<T> dynamic_routing(const TensorPtr<T>& u, const TensorPtr<T>& w,
                             int iters, RoutingTrace<T>* trace = nullptr) {
  using namespace ad;
  if (iters < 1) throw std::invalid_argument("routing: iters must be >= 1");
  auto uh = caps_detail::caps_transform(u, w);
  const int B = uh->shape[0], I = uh->shape[1], J = uh->shape[2];
  TensorPtr<T> b_logits = Tensor<T>::zeros({B, I, J});
  TensorPtr<T> v;
  for (int it = 0; it < iters; ++it) {
    auto c = softmax_lastdim(b_logits);
    if (trace) trace->couplings.push_back(c);
    v = squash_lastdim(caps_detail::route_weighted_sum(c, uh));
    if (it + 1 < iters)
      b_logits = add(b_logits, caps_detail::route_agreement(uh, v));
  }
  return v;
}

template <typename T>
struct CapsuleParams {
  TensorPtr<T> head_w;  // [heads*dim, c_in, 1, 1]
  TensorPtr<T> head_b;  // [heads*dim]
  TensorPtr<T> win_w;   // [heads*win*freq, 8, 8, 8]
  TensorPtr<T> utt_w;   // [8, 4, 16, 8]
  int heads = 8, prim_dim = 8;
  int win_caps = 8, win_dim = 8;
  int utt_caps = 4, utt_dim = 16;
  int window = 1, shift = 1;  // in CNN-output steps
  int routing_iters = 3;
  int freq = 0;  // CNN-output frequency bins, fixed by the frontend config
};

template <typename T>
CapsuleParams<T> make_capsule_stage(ad::ParamSet<T>& ps, const std::string& prefix,
                                    int c_in, int freq, int window, int shift,
                                    int routing_iters, RngStream& rng) {
  if (window < 1 || shift < 1)
    throw std::invalid_argument("capsule: window and shift must be >= 1");
  CapsuleParams<T> p;
  p.window = window;
  p.shift = shift;
  p.routing_iters = routing_iters;
  p.freq = freq;
  const int hd = p.heads * p.prim_dim;
  p.head_w = ps.add(prefix + "head_w", ad::xavier_init<T>({hd, c_in, 1, 1}, rng));
  p.head_b = ps.add(prefix + "head_b", ad::Tensor<T>::zeros({hd}));
  const int prim = p.heads * window * freq;
  p.win_w = ps.add(prefix + "win_w",
                   ad::xavier_init_fans<T>({prim, p.win_caps, p.win_dim, p.prim_dim},
                                           rng, p.prim_dim, p.win_dim));
  p.utt_w = ps.add(prefix + "utt_w",
                   ad::xavier_init_fans<T>({p.win_caps, p.utt_caps, p.utt_dim, p.win_dim},
                                           rng, p.win_dim, p.utt_dim));
  return p;
}

// x is the CNN output [B, C, T, F]. Returns 4 utterance-level capsules of
// size 16. Fewer time steps than one window falls back to a single
// zero-padded window.
template <typename T>
CapsuleSet<T> capsule_stage(const TensorPtr<T>& x, const CapsuleParams<T>& p,
                            RoutingTrace<T>* trace = nullptr) {
  using namespace ad;
  if (x->shape.size() != 4)
    throw std::invalid_argument("capsule_stage: need rank-4 CNN output");
  if (x->shape[3] != p.freq)
    throw std::invalid_argument("capsule_stage: frequency dim " +
                                std::to_string(x->shape[3]) + " != expected " +
                                std::to_string(p.freq));
  const int Tn = x->shape[2];
  auto heads = conv2d(x, p.head_w, p.head_b, /*relu_after=*/false);

  int nwin = Tn < p.window ? 1 : (Tn - p.window) / p.shift + 1;
  std::vector<TensorPtr<T>> win_caps(nwin);
  for (int wi = 0; wi < nwin; ++wi) {
    auto u = caps_detail::gather_window(heads, wi * p.shift, p.window, p.prim_dim);
    win_caps[wi] = dynamic_routing(u, p.win_w, p.routing_iters, trace);
  }
  auto all = nwin == 1 ? win_caps[0] : concat_axis1(win_caps);  // [B, nwin*8, 8]
  CapsuleSet<T> out;
  out.caps = dynamic_routing(all, p.utt_w, p.routing_iters, trace);
  out.level = CapsuleLevel::utterance;
  return out;
}

}  // namespace sernas::nn
