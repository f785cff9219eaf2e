#pragma once

// Bidirectional GRU built from tape primitives. Standard cell:
//   z = sigmoid(x Wz + biz + h Uz + bhz)
//   r = sigmoid(x Wr + bir + h Ur + bhr)
//   n = tanh(x Wn + bin + r * (h Un + bhn))
//   h' = (1 - z) * n + z * h
// Separate input/hidden biases, so the per-direction parameter count is
// 3*(hidden*(input+hidden) + 2*hidden).

#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/params.hpp"

namespace sernas::nn {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

// Batch of sequences [B,T,F] with optional per-element valid lengths.
// Empty valid_len means all T steps are valid for every element.
template <typename T>
struct SequenceBatch {
  TensorPtr<T> x;
  std::vector<int> valid_len;

  int batch() const { return x->shape[0]; }
  int time() const { return x->shape[1]; }
  int features() const { return x->shape[2]; }

  int len(int b) const { return valid_len.empty() ? time() : valid_len[b]; }

  void validate() const {
    if (x->shape.size() != 3)
      throw std::invalid_argument("sequence batch must be [batch,time,features]");
    if (!valid_len.empty()) {
      if (static_cast<int>(valid_len.size()) != batch())
        throw std::invalid_argument("valid_len size must equal batch");
      for (int l : valid_len)
        if (l < 0 || l > time())
          throw std::invalid_argument("valid length " + std::to_string(l) +
                                      " outside [0, " + std::to_string(time()) + "]");
    }
  }
};

template <typename T>
struct GruDirection {
  TensorPtr<T> wz, wr, wn;  // [in, hidden]
  TensorPtr<T> uz, ur, un;  // [hidden, hidden]
  TensorPtr<T> biz, bir, bin, bhz, bhr, bhn;  // [hidden]
};

template <typename T>
struct GruParams {
  GruDirection<T> fwd, bwd;
  int input = 0, hidden = 0;
};

template <typename T>
GruDirection<T> make_gru_direction(ad::ParamSet<T>& ps, const std::string& prefix,
                                   int input, int hidden, RngStream& rng) {
  GruDirection<T> d;
  auto w = [&](const char* n) {
    return ps.add(prefix + n, ad::xavier_init<T>({input, hidden}, rng));
  };
  auto u = [&](const char* n) {
    return ps.add(prefix + n, ad::xavier_init<T>({hidden, hidden}, rng));
  };
  auto b = [&](const char* n) {
    return ps.add(prefix + n, ad::Tensor<T>::zeros({hidden}));
  };
  d.wz = w("wz"); d.wr = w("wr"); d.wn = w("wn");
  d.uz = u("uz"); d.ur = u("ur"); d.un = u("un");
  d.biz = b("biz"); d.bir = b("bir"); d.bin = b("bin");
  d.bhz = b("bhz"); d.bhr = b("bhr"); d.bhn = b("bhn");
  return d;
}

template <typename T>
GruParams<T> make_gru(ad::ParamSet<T>& ps, const std::string& prefix, int input,
                      int hidden, RngStream& rng) {
  if (hidden < 1) throw std::invalid_argument("gru: hidden must be >= 1");
  GruParams<T> g;
  g.input = input;
  g.hidden = hidden;
  g.fwd = make_gru_direction(ps, prefix + "fwd_", input, hidden, rng);
  g.bwd = make_gru_direction(ps, prefix + "bwd_", input, hidden, rng);
  return g;
}

template <typename T>
struct BiGruOut {
  SequenceBatch<T> outputs;  // [B,T,2*hidden]; invalid steps are zero
  TensorPtr<T> fwd_final;    // forward state at the last valid step, [B,hidden]
  TensorPtr<T> bwd_first;    // backward state at step 0, [B,hidden]
};

namespace detail {

template <typename T>
TensorPtr<T> gru_cell(const GruDirection<T>& d, const TensorPtr<T>& xt,
                      const TensorPtr<T>& h) {
  using namespace ad;
  auto z = sigmoid(add(add_rowvec(matmul(xt, d.wz), d.biz),
                       add_rowvec(matmul(h, d.uz), d.bhz)));
  auto r = sigmoid(add(add_rowvec(matmul(xt, d.wr), d.bir),
                       add_rowvec(matmul(h, d.ur), d.bhr)));
  auto n = tanh_t(add(add_rowvec(matmul(xt, d.wn), d.bin),
                      mul(r, add_rowvec(matmul(h, d.un), d.bhn))));
  return add(mul(one_minus(z), n), mul(z, h));
}

}  // namespace detail

// Outputs concatenate forward and backward states per timestep. Per-element
// valid lengths: the forward state freezes after the last valid step, the
// backward pass starts at it, and output rows beyond it are zero.
template <typename T>
BiGruOut<T> bigru(const SequenceBatch<T>& seq, const GruParams<T>& g) {
  using namespace ad;
  seq.validate();
  const int B = seq.batch(), Tn = seq.time();
  if (Tn < 1) throw std::invalid_argument("bigru: empty sequence");
  if (seq.features() != g.input)
    throw std::invalid_argument("bigru: input features " +
                                std::to_string(seq.features()) + " != " +
                                std::to_string(g.input));
  const int Hn = g.hidden;

  std::vector<std::vector<uint8_t>> valid(Tn, std::vector<uint8_t>(B));
  bool ragged = false;
  for (int t = 0; t < Tn; ++t)
    for (int b = 0; b < B; ++b) {
      valid[t][b] = t < seq.len(b);
      if (!valid[t][b]) ragged = true;
    }

  auto zero_state = Tensor<T>::zeros({B, Hn});

  std::vector<TensorPtr<T>> fwd_out(Tn), bwd_out(Tn);
  auto h = zero_state;
  for (int t = 0; t < Tn; ++t) {
    auto c = detail::gru_cell(g.fwd, slice_time(seq.x, t), h);
    h = ragged ? select_rows(valid[t], c, h) : c;
    fwd_out[t] = ragged ? select_rows(valid[t], h, zero_state) : h;
  }
  auto fwd_final = h;

  h = zero_state;
  for (int t = Tn - 1; t >= 0; --t) {
    auto c = detail::gru_cell(g.bwd, slice_time(seq.x, t), h);
    h = ragged ? select_rows(valid[t], c, zero_state) : c;
    bwd_out[t] = h;
  }
  auto bwd_first = h;

  std::vector<TensorPtr<T>> both(Tn);
  for (int t = 0; t < Tn; ++t) both[t] = concat_lastdim(fwd_out[t], bwd_out[t]);
  BiGruOut<T> out;
  out.outputs.x = stack_time(both);
  out.outputs.valid_len = seq.valid_len;
  out.fwd_final = fwd_final;
  out.bwd_first = bwd_first;
  return out;
}

}  // namespace sernas::nn
