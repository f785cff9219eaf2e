#pragma once

// Supernet construction and the mixed-operation forward rule. A mixed layer
// holds N candidate operations, their parameters, and a trainable logit
// vector alpha; architecture weights are softmax(alpha). Layer output:
//   full:    h = sum_i a_i phi_i(h_in)
//   sample:  h = phi_chosen(h_in)             (no architecture weight)
//   dropout: h = N/(N-k) * sum_kept a_i phi_i(h_in)
// Conv candidates with different kernels produce different valid-conv output
// sizes; all candidate outputs are center-cropped to the smallest candidate's
// spatial dims (computed over the full candidate set, so shapes do not depend
// on the mask).

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/params.hpp"
#include "sernas/ad/rng.hpp"
#include "sernas/nn/attention.hpp"
#include "sernas/nn/capsule.hpp"
#include "sernas/nn/conv.hpp"
#include "sernas/nn/dense.hpp"
#include "sernas/search/descriptor.hpp"
#include "sernas/search/mask.hpp"

namespace sernas::search {

using ad::Shape;
using ad::Tensor;
using ad::TensorPtr;

// Stabilized softmax over plain logits (the non-graph route used for
// architecture derivation and reporting).
inline std::vector<double> arch_softmax(const std::vector<double>& alpha) {
  if (alpha.empty()) throw std::invalid_argument("arch_softmax: empty vector");
  double mx = alpha[0];
  for (double a : alpha) mx = std::max(mx, a);
  std::vector<double> w(alpha.size());
  double z = 0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    w[i] = std::exp(alpha[i] - mx);
    z += w[i];
  }
  for (double& v : w) v /= z;
  return w;
}

enum class Family { cnn_rnn_att, cnn_seqcap, custom };

inline std::string family_str(Family f) {
  switch (f) {
    case Family::cnn_rnn_att: return "cnn_rnn_att";
    case Family::cnn_seqcap: return "cnn_seqcap";
    case Family::custom: return "custom";
  }
  return "?";
}

// Declarative description of the search space; lives inside ExperimentConfig.
struct SearchSpaceSpec {
  Family family = Family::cnn_rnn_att;
  int num_classes = 4;

  // family stacks (Table-1 style)
  KernelList pair_kernels = default_pair_kernels();
  // optional explicit set for the second branch, stored pre-transposition;
  // empty mirrors pair_kernels
  KernelList pair_kernels_b;
  bool tied_conv_pair = false;
  KernelList conv3_kernels = default_deep_kernels();
  KernelList conv4_kernels = default_deep_kernels();
  std::vector<int> head_widths = default_head_widths();
  int pair_channels = 8;
  int deep_channels = 16;
  int gru_hidden = 64;
  int caps_window_input_steps = 40;
  int caps_shift_input_steps = 20;
  int routing_iters = 3;

  // custom family: a flat list of mixed-conv and pool stages, then a
  // mean-over-time + dense head.
  struct CustomStage {
    bool is_pool = false;
    int c_out = 0;
    KernelList kernels;  // mixed conv candidates
    int ph = 0, pw = 0;  // pool window
    std::pair<int, int> crop{0, 0};
  };
  std::vector<CustomStage> custom_stages;

  // effective crop geometry of the family conv layers ({0,0} = from the set);
  // filled by collapse_spec so retraining keeps the searched dims
  std::pair<int, int> pair_crop{0, 0};
  std::pair<int, int> pair_b_crop{0, 0};  // post-transposition
  std::pair<int, int> conv3_crop{0, 0};
  std::pair<int, int> conv4_crop{0, 0};
};

template <typename T>
struct MixedConv {
  std::string id;
  int c_in = 0, c_out = 0;
  std::vector<CandidateDesc> cands;
  std::vector<ad::ParamSet<T>> cand_params;  // per candidate: w, b
  TensorPtr<T> alpha;                        // [N]; shared with twin if tied
  int max_kh = 0, max_kw = 0;

  int n() const { return static_cast<int>(cands.size()); }
  int out_h(int in_h) const { return in_h - max_kh + 1; }
  int out_w(int in_w) const { return in_w - max_kw + 1; }
};

// A uniform view of one mixed layer for mask drawing, derivation and
// parameter routing. A tied conv pair appears as a single view whose chosen
// candidate governs both branches.
template <typename T>
struct MixedLayerView {
  std::string id;
  TensorPtr<T> alpha;
  std::vector<CandidateDesc> cands;
  std::vector<std::vector<ad::ParamSet<T>*>> cand_params;  // per candidate

  int n() const { return static_cast<int>(cands.size()); }
};

template <typename T>
struct DenseStackCand {
  TensorPtr<T> w1, b1, w2, b2;
};

// Candidate i of a conv mixed layer, center-cropped to the layer's common
// output dims (min over the full candidate set, independent of any mask).
template <typename T>
TensorPtr<T> candidate_conv(MixedConv<T>& mc, int i, const TensorPtr<T>& x) {
  auto& ps = mc.cand_params[i];
  auto y = nn::conv2d(x, ps.at("w"), ps.at("b"));
  return ad::crop_center_hw(y, mc.out_h(x->shape[2]), mc.out_w(x->shape[3]));
}

enum class HeadKind { gru_attention, capsule_dense, avg_dense };

struct DiscreteArch {
  enum class Provenance { argmax, random };
  Provenance provenance = Provenance::argmax;
  std::vector<int> choice;           // per mixed layer view
  std::vector<std::string> layer_ids;
  std::vector<std::string> op_names;
  int64_t param_count = 0;
};

// Per-forward evaluation plan.
template <typename T>
struct ForwardSpec {
  PathMask::Mode mode = PathMask::Mode::full;
  const PathMask* mask = nullptr;  // required for sample/dropout
  // Per-mixed-layer explicit weights (bypasses softmax(alpha)); used by the
  // equivalence checks. Entries may be empty to fall back to alpha.
  const std::vector<std::vector<double>>* weight_override = nullptr;
};

template <typename T>
class Supernet {
 public:
  SearchSpaceSpec spec;
  int in_freq = 0;
  int num_classes = 4;

  bool has_pair = false;
  MixedConv<T> pair_a, pair_b;
  int pair_pool_h = 2, pair_pool_w = 1;

  struct Stage {
    bool is_pool = false;
    MixedConv<T> conv;
    int ph = 0, pw = 0;
  };
  std::vector<Stage> stages;

  HeadKind head = HeadKind::avg_dense;
  ad::ParamSet<T> fixed_params;
  nn::GruParams<T> gru;
  std::vector<nn::AttentionParams<T>> att_cands;
  std::vector<ad::ParamSet<T>> att_cand_params;
  nn::CapsuleParams<T> caps;
  std::vector<DenseStackCand<T>> dense_cands;
  std::vector<ad::ParamSet<T>> dense_cand_params;
  TensorPtr<T> head_alpha;
  TensorPtr<T> avg_w, avg_b;

  int cnn_out_channels = 0;
  int cnn_out_freq = 0;     // frequency bins after the trunk (time-independent)
  int time_pool_factor = 1; // product of pool windows on the time axis

  // ---- registry ----------------------------------------------------------

  std::vector<MixedLayerView<T>> mixed_views() {
    std::vector<MixedLayerView<T>> v;
    auto conv_view = [](MixedConv<T>& mc) {
      MixedLayerView<T> mv;
      mv.id = mc.id;
      mv.alpha = mc.alpha;
      mv.cands = mc.cands;
      for (auto& ps : mc.cand_params) mv.cand_params.push_back({&ps});
      return mv;
    };
    if (has_pair) {
      if (spec.tied_conv_pair) {
        MixedLayerView<T> mv = conv_view(pair_a);
        mv.id = pair_a.id + "+" + pair_b.id;
        for (int i = 0; i < pair_b.n(); ++i)
          mv.cand_params[i].push_back(&pair_b.cand_params[i]);
        v.push_back(std::move(mv));
      } else {
        v.push_back(conv_view(pair_a));
        v.push_back(conv_view(pair_b));
      }
    }
    for (auto& s : stages)
      if (!s.is_pool) v.push_back(conv_view(s.conv));

    if (head == HeadKind::gru_attention) {
      MixedLayerView<T> mv;
      mv.id = "attention";
      mv.alpha = head_alpha;
      for (size_t i = 0; i < att_cands.size(); ++i) {
        mv.cands.push_back(CandidateDesc::attention(att_cands[i].channels));
        mv.cand_params.push_back({&att_cand_params[i]});
      }
      v.push_back(std::move(mv));
    } else if (head == HeadKind::capsule_dense) {
      MixedLayerView<T> mv;
      mv.id = "dense";
      mv.alpha = head_alpha;
      for (size_t i = 0; i < dense_cands.size(); ++i) {
        mv.cands.push_back(CandidateDesc::dense(dense_cands[i].w1->shape[1]));
        mv.cand_params.push_back({&dense_cand_params[i]});
      }
      v.push_back(std::move(mv));
    }
    return v;
  }

  std::vector<int> mixed_sizes() {
    std::vector<int> s;
    for (auto& mv : mixed_views()) s.push_back(mv.n());
    return s;
  }

  // All architecture logit tensors, one per mixed layer view.
  std::vector<TensorPtr<T>> arch_params() {
    std::vector<TensorPtr<T>> a;
    for (auto& mv : mixed_views()) a.push_back(mv.alpha);
    return a;
  }

  // Model parameters; with a mask, only candidates the mask keeps (fixed
  // parameters are always included).
  std::vector<TensorPtr<T>> model_params(const PathMask* mask = nullptr) {
    std::vector<TensorPtr<T>> out;
    auto views = mixed_views();
    for (size_t l = 0; l < views.size(); ++l)
      for (int i = 0; i < views[l].n(); ++i) {
        if (mask && !mask->keep[l][i]) continue;
        for (auto* ps : views[l].cand_params[i]) ps->append_to(out);
      }
    fixed_params.append_to(out);
    return out;
  }

  int64_t count_params_all() {
    int64_t n = 0;
    for (const auto& p : model_params()) n += p->size();
    return n;
  }

  int64_t count_params_discrete(const std::vector<int>& choice) {
    auto views = mixed_views();
    if (choice.size() != views.size())
      throw std::invalid_argument("count_params: choice length mismatch");
    int64_t n = 0;
    for (size_t l = 0; l < views.size(); ++l) {
      if (choice[l] < 0 || choice[l] >= views[l].n())
        throw std::invalid_argument("count_params: choice out of range");
      for (auto* ps : views[l].cand_params[choice[l]]) n += ps->total_size();
    }
    n += fixed_params.total_size();
    return n;
  }

  // ---- forward ------------------------------------------------------------

  TensorPtr<T> forward(const TensorPtr<T>& x, const ForwardSpec<T>& fs) {
    if (x->shape.size() != 4 || x->shape[1] != 1)
      throw std::invalid_argument("supernet: input must be [B,1,T,F], got " +
                                  ad::shape_str(x->shape));
    if (x->shape[3] != in_freq)
      throw std::invalid_argument("supernet: input has " +
                                  std::to_string(x->shape[3]) +
                                  " frequency bins, expected " +
                                  std::to_string(in_freq));
    validate_spec_mask(fs);

    size_t mix_idx = 0;
    TensorPtr<T> cur = x;
    if (has_pair) {
      const size_t ia = mix_idx++;
      const size_t ib = spec.tied_conv_pair ? ia : mix_idx++;
      auto oa = mixed_conv_forward(pair_a, cur, fs, ia);
      auto ob = mixed_conv_forward(pair_b, cur, fs, ib);
      const int th = std::min(oa->shape[2], ob->shape[2]);
      const int tw = std::min(oa->shape[3], ob->shape[3]);
      cur = ad::concat_axis1<T>({ad::crop_center_hw(oa, th, tw),
                                 ad::crop_center_hw(ob, th, tw)});
      cur = nn::maxpool2d(cur, pair_pool_h, pair_pool_w);
    }
    for (auto& s : stages) {
      if (s.is_pool)
        cur = nn::maxpool2d(cur, s.ph, s.pw);
      else
        cur = mixed_conv_forward(s.conv, cur, fs, mix_idx++);
    }
    switch (head) {
      case HeadKind::gru_attention: {
        nn::SequenceBatch<T> seq;
        seq.x = nn::to_sequence(cur);
        auto g = nn::bigru(seq, gru);
        return head_mixed_forward(
            fs, mix_idx, static_cast<int>(att_cands.size()),
            [&](int i) { return nn::attention_pool(g.outputs, att_cands[i]).logits; });
      }
      case HeadKind::capsule_dense: {
        auto cs = nn::capsule_stage(cur, caps);
        auto flat = ad::reshape(cs.caps, {cs.caps->shape[0],
                                          cs.caps->shape[1] * cs.caps->shape[2]});
        return head_mixed_forward(
            fs, mix_idx, static_cast<int>(dense_cands.size()), [&](int i) {
              auto h = nn::dense(flat, dense_cands[i].w1, dense_cands[i].b1,
                                 nn::Activation::relu);
              return nn::dense(h, dense_cands[i].w2, dense_cands[i].b2);
            });
      }
      case HeadKind::avg_dense: {
        auto feats = nn::mean_time_flatten(cur);
        return nn::dense(feats, avg_w, avg_b);
      }
    }
    throw std::logic_error("unreachable head kind");
  }

 private:
  void validate_spec_mask(const ForwardSpec<T>& fs) {
    if (fs.mode != PathMask::Mode::full) {
      if (!fs.mask)
        throw std::invalid_argument("supernet: sample/dropout forward needs a mask");
      if (fs.mask->mode != fs.mode)
        throw std::invalid_argument("supernet: mask mode mismatch");
      fs.mask->validate(mixed_sizes());
    }
  }

  // Graph weights for one mixed layer: override constants or softmax(alpha).
  TensorPtr<T> layer_weights(const TensorPtr<T>& alpha, const ForwardSpec<T>& fs,
                             size_t mix_idx, int n) {
    if (fs.weight_override && mix_idx < fs.weight_override->size() &&
        !(*fs.weight_override)[mix_idx].empty()) {
      const auto& w = (*fs.weight_override)[mix_idx];
      if (static_cast<int>(w.size()) != n)
        throw std::invalid_argument("weight override length mismatch");
      auto t = Tensor<T>::zeros({n});
      for (int i = 0; i < n; ++i) t->value[i] = static_cast<T>(w[i]);
      return t;
    }
    return ad::softmax_lastdim(alpha);
  }

  template <typename EvalCand>
  TensorPtr<T> combine_candidates(const std::string& layer_id, int n,
                                  const ForwardSpec<T>& fs, size_t mix_idx,
                                  const TensorPtr<T>& alpha, EvalCand eval) {
    if (fs.mode == PathMask::Mode::sample)
      return eval(fs.mask->chosen(mix_idx));

    const auto& keep = fs.mask ? fs.mask->keep[mix_idx] : std::vector<uint8_t>();
    auto weights = layer_weights(alpha, fs, mix_idx, n);
    TensorPtr<T> acc;
    for (int i = 0; i < n; ++i) {
      if (fs.mode == PathMask::Mode::dropout && !keep[i]) continue;
      auto term = ad::scale_by(eval(i), ad::pick(weights, i));
      if (acc && acc->shape != term->shape)
        throw std::invalid_argument("mixed layer " + layer_id +
                                    ": candidate outputs cannot be aligned");
      acc = acc ? ad::add(acc, term) : term;
    }
    if (fs.mode == PathMask::Mode::dropout)
      acc = ad::scale(acc, static_cast<T>(fs.mask->layer_scale[mix_idx]));
    return acc;
  }

  TensorPtr<T> mixed_conv_forward(MixedConv<T>& mc, const TensorPtr<T>& x,
                                  const ForwardSpec<T>& fs, size_t mix_idx) {
    if (mc.out_h(x->shape[2]) < 1 || mc.out_w(x->shape[3]) < 1)
      throw std::invalid_argument("mixed layer " + mc.id + ": input " +
                                  ad::shape_str(x->shape) +
                                  " too small for its largest kernel");
    return combine_candidates(mc.id, mc.n(), fs, mix_idx, mc.alpha,
                              [&](int i) { return candidate_conv(mc, i, x); });
  }

  template <typename EvalCand>
  TensorPtr<T> head_mixed_forward(const ForwardSpec<T>& fs, size_t mix_idx, int n,
                                  EvalCand eval) {
    return combine_candidates("head", n, fs, mix_idx, head_alpha, eval);
  }
};

// The standalone mixed-operation rule over one conv layer (Eq. 1 shape).
// Exposed for direct testing; Supernet::forward has the same semantics.
template <typename T>
TensorPtr<T> mixed_forward(MixedConv<T>& layer, const TensorPtr<T>& x,
                           const std::vector<double>& a, const PathMask& mask,
                           size_t layer_index) {
  if (mask.mode == PathMask::Mode::sample)
    return candidate_conv(layer, mask.chosen(layer_index), x);
  if (static_cast<int>(a.size()) != layer.n())
    throw std::invalid_argument("mixed_forward: weight length mismatch");
  auto wt = Tensor<T>::zeros({layer.n()});
  for (int i = 0; i < layer.n(); ++i) wt->value[i] = static_cast<T>(a[i]);
  TensorPtr<T> acc;
  for (int i = 0; i < layer.n(); ++i) {
    if (mask.mode == PathMask::Mode::dropout && !mask.keep[layer_index][i]) continue;
    auto term = ad::scale_by(candidate_conv(layer, i, x), ad::pick(wt, i));
    if (acc && acc->shape != term->shape)
      throw std::invalid_argument("mixed layer " + layer.id +
                                  ": candidate outputs cannot be aligned");
    acc = acc ? ad::add(acc, term) : term;
  }
  if (mask.mode == PathMask::Mode::dropout)
    acc = ad::scale(acc, static_cast<T>(mask.layer_scale[layer_index]));
  return acc;
}

// ---- construction ---------------------------------------------------------

namespace build_detail {

// crop: effective layer output geometry as (kh, kw) of the largest kernel to
// crop like; {0,0} derives it from the candidate set. Collapsed specs use it
// to keep discrete rebuilds on the supernet's dims.
template <typename T>
MixedConv<T> make_mixed_conv(const std::string& id, int c_in, int c_out,
                             const KernelList& kernels, bool transpose,
                             RngStream& rng, std::pair<int, int> crop = {0, 0}) {
  if (kernels.empty())
    throw std::invalid_argument("layer " + id + ": empty candidate set");
  MixedConv<T> mc;
  mc.id = id;
  mc.c_in = c_in;
  mc.c_out = c_out;
  auto r = rng.split(id);
  for (size_t i = 0; i < kernels.size(); ++i) {
    int kh = kernels[i].first, kw = kernels[i].second;
    if (transpose) std::swap(kh, kw);
    if (kh < 1 || kw < 1)
      throw std::invalid_argument("layer " + id + ": bad kernel");
    mc.cands.push_back(CandidateDesc::conv(kh, kw));
    ad::ParamSet<T> ps;
    ps.prefix = id + "/cand" + std::to_string(i) + "/";
    ps.add("w", ad::xavier_init<T>({c_out, c_in, kh, kw}, r));
    ps.add("b", Tensor<T>::zeros({c_out}));
    mc.cand_params.push_back(std::move(ps));
    mc.max_kh = std::max(mc.max_kh, kh);
    mc.max_kw = std::max(mc.max_kw, kw);
  }
  mc.max_kh = std::max(mc.max_kh, crop.first);
  mc.max_kw = std::max(mc.max_kw, crop.second);
  CandidateSet cs{id, mc.cands};
  cs.validate();
  mc.alpha = Tensor<T>::zeros({mc.n()});
  mc.alpha->requires_grad = true;
  mc.alpha->name = id + "/alpha";
  return mc;
}

}  // namespace build_detail

// Builds the supernet for the given search-space spec and input spectrogram
// width. Architecture logits start at zero (uniform weights); all weights are
// Xavier-initialized from named sub-streams of `rng`.
template <typename T>
std::shared_ptr<Supernet<T>> build_supernet(const SearchSpaceSpec& spec,
                                            int in_freq, RngStream rng) {
  using build_detail::make_mixed_conv;
  if (in_freq < 1) throw std::invalid_argument("build_supernet: unresolved input shape");
  auto net = std::make_shared<Supernet<T>>();
  net->spec = spec;
  net->in_freq = in_freq;
  net->num_classes = spec.num_classes;

  int freq = in_freq;
  int channels = 1;
  int time_factor = 1;

  if (spec.family != Family::custom) {
    net->has_pair = true;
    net->pair_a = make_mixed_conv<T>("conv1", 1, spec.pair_channels,
                                     spec.pair_kernels, false, rng,
                                     spec.pair_crop);
    net->pair_b = make_mixed_conv<T>(
        "conv2", 1, spec.pair_channels,
        spec.pair_kernels_b.empty() ? spec.pair_kernels : spec.pair_kernels_b,
        true, rng, spec.pair_b_crop);
    if (spec.tied_conv_pair) {
      if (net->pair_a.n() != net->pair_b.n())
        throw std::invalid_argument("tied conv pair needs equal candidate counts");
      net->pair_b.alpha = net->pair_a.alpha;
    }
    // concat crops to the joint minimum of both branches
    freq = std::min(freq - net->pair_a.max_kw + 1, freq - net->pair_b.max_kw + 1);
    channels = 2 * spec.pair_channels;
    net->pair_pool_h = 2;
    net->pair_pool_w = 1;
    freq /= net->pair_pool_w;
    time_factor *= net->pair_pool_h;

    auto add_conv = [&](const std::string& id, const KernelList& ks,
                        std::pair<int, int> crop) {
      typename Supernet<T>::Stage s;
      s.is_pool = false;
      s.conv = make_mixed_conv<T>(id, channels, spec.deep_channels, ks, false,
                                  rng, crop);
      freq = freq - s.conv.max_kw + 1;
      channels = spec.deep_channels;
      net->stages.push_back(std::move(s));
    };
    auto add_pool = [&](int ph, int pw) {
      typename Supernet<T>::Stage s;
      s.is_pool = true;
      s.ph = ph;
      s.pw = pw;
      freq /= pw;
      time_factor *= ph;
      net->stages.push_back(std::move(s));
    };
    add_conv("conv3", spec.conv3_kernels, spec.conv3_crop);
    add_pool(2, 2);
    add_conv("conv4", spec.conv4_kernels, spec.conv4_crop);
    add_pool(2, 2);
    add_pool(4, 1);
  } else {
    for (size_t si = 0; si < spec.custom_stages.size(); ++si) {
      const auto& cs = spec.custom_stages[si];
      typename Supernet<T>::Stage s;
      if (cs.is_pool) {
        s.is_pool = true;
        s.ph = cs.ph;
        s.pw = cs.pw;
        freq /= cs.pw;
        time_factor *= cs.ph;
      } else {
        s.conv = make_mixed_conv<T>("conv" + std::to_string(si + 1), channels,
                                    cs.c_out, cs.kernels, false, rng, cs.crop);
        freq = freq - s.conv.max_kw + 1;
        channels = cs.c_out;
      }
      net->stages.push_back(std::move(s));
    }
  }
  if (freq < 1)
    throw std::invalid_argument("build_supernet: input frequency dim too small "
                                "for the configured stack");
  net->cnn_out_channels = channels;
  net->cnn_out_freq = freq;
  net->time_pool_factor = time_factor;

  auto head_rng = rng.split("head");
  switch (spec.family) {
    case Family::cnn_rnn_att: {
      net->head = HeadKind::gru_attention;
      net->gru = nn::make_gru(net->fixed_params, "gru/", channels * freq,
                              spec.gru_hidden, head_rng);
      if (spec.head_widths.empty())
        throw std::invalid_argument("attention: empty candidate set");
      for (size_t i = 0; i < spec.head_widths.size(); ++i) {
        ad::ParamSet<T> ps;
        net->att_cands.push_back(nn::make_attention(
            ps, "attention/cand" + std::to_string(i) + "/", 2 * spec.gru_hidden,
            spec.head_widths[i], spec.num_classes, head_rng));
        net->att_cand_params.push_back(std::move(ps));
      }
      break;
    }
    case Family::cnn_seqcap: {
      net->head = HeadKind::capsule_dense;
      const int win = std::max(1, spec.caps_window_input_steps / time_factor);
      const int shift = std::max(1, spec.caps_shift_input_steps / time_factor);
      net->caps = nn::make_capsule_stage(net->fixed_params, "caps/", channels,
                                         freq, win, shift, spec.routing_iters,
                                         head_rng);
      if (spec.head_widths.empty())
        throw std::invalid_argument("dense head: empty candidate set");
      const int flat = net->caps.utt_caps * net->caps.utt_dim;
      for (size_t i = 0; i < spec.head_widths.size(); ++i) {
        const int d = spec.head_widths[i];
        const std::string p = "dense/cand" + std::to_string(i) + "/";
        ad::ParamSet<T> ps;
        DenseStackCand<T> dc;
        dc.w1 = ps.add(p + "w1", ad::xavier_init<T>({flat, d}, head_rng));
        dc.b1 = ps.add(p + "b1", Tensor<T>::zeros({d}));
        dc.w2 = ps.add(p + "w2", ad::xavier_init<T>({d, spec.num_classes}, head_rng));
        dc.b2 = ps.add(p + "b2", Tensor<T>::zeros({spec.num_classes}));
        net->dense_cands.push_back(std::move(dc));
        net->dense_cand_params.push_back(std::move(ps));
      }
      break;
    }
    case Family::custom: {
      net->head = HeadKind::avg_dense;
      net->avg_w = net->fixed_params.add(
          "avg_head/w",
          ad::xavier_init<T>({channels * freq, spec.num_classes}, head_rng));
      net->avg_b = net->fixed_params.add("avg_head/b",
                                         Tensor<T>::zeros({spec.num_classes}));
      break;
    }
  }
  if (net->head != HeadKind::avg_dense) {
    auto views_n = net->head == HeadKind::gru_attention ? net->att_cands.size()
                                                        : net->dense_cands.size();
    net->head_alpha = Tensor<T>::zeros({static_cast<int>(views_n)});
    net->head_alpha->requires_grad = true;
    net->head_alpha->name = "head/alpha";
  }

  // global parameter-id uniqueness across the whole net
  {
    std::vector<TensorPtr<T>> all = net->model_params();
    std::unordered_set<std::string> ids;
    for (const auto& p : all)
      if (!ids.insert(p->name).second)
        throw std::logic_error("duplicate parameter id " + p->name);
  }
  return net;
}

}  // namespace sernas::search
