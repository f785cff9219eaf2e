#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fd_helpers.hpp"
#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/rng.hpp"
#include "sernas/nn/attention.hpp"
#include "sernas/nn/capsule.hpp"
#include "sernas/nn/conv.hpp"
#include "sernas/nn/dense.hpp"
#include "sernas/nn/loss.hpp"
#include "sernas/nn/rnn.hpp"

using namespace sernas;
using namespace sernas::ad;
using namespace sernas::nn;

namespace {

TensorPtr<double> randt(Shape s, RngStream& rng, double lo = -1, double hi = 1) {
  auto t = Tensor<double>::zeros(std::move(s));
  for (auto& v : t->value) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

TEST_CASE("conv2d: 1x1 identity kernel passes channels through") {
  auto x = Tensor<double>::from({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto w = Tensor<double>::zeros({2, 2, 1, 1});
  w->value[0] = 1.0;  // co=0 <- ci=0
  w->value[3] = 1.0;  // co=1 <- ci=1
  auto b = Tensor<double>::zeros({2});
  auto y = conv2d(x, w, b);
  for (size_t i = 0; i < x->value.size(); ++i)
    CHECK(y->value[i] == doctest::Approx(x->value[i]));
}

TEST_CASE("conv2d: 2x2 all-ones kernel sums the patch") {
  auto x = Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto w = Tensor<double>::full({1, 1, 2, 2}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, w, b);
  REQUIRE(y->value.size() == 1);
  CHECK(y->value[0] == doctest::Approx(10.0));
}

TEST_CASE("conv2d: 2x8 kernel with 8 channels gives [1,8,T-1,F-7]") {
  RngStream rng(3, "conv");
  const int T = 12, F = 16;
  auto x = randt({1, 1, T, F}, rng);
  auto w = xavier_init<double>({8, 1, 2, 8}, rng);
  auto b = Tensor<double>::zeros({8});
  auto y = conv2d(x, w, b);
  CHECK(y->shape == Shape{1, 8, T - 1, F - 7});
}

TEST_CASE("conv2d: kernel larger than input names both shapes") {
  auto x = Tensor<double>::zeros({1, 1, 2, 2});
  auto w = Tensor<double>::zeros({1, 1, 3, 3});
  auto b = Tensor<double>::zeros({1});
  try {
    conv2d(x, w, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[1,1,3,3]") != std::string::npos);
    CHECK(msg.find("[1,1,2,2]") != std::string::npos);
  }
}

// -------------------------------------------------------------- maxpool2d

TEST_CASE("maxpool2d: constant input stays constant") {
  auto x = Tensor<double>::full({1, 1, 4, 4}, 2.5);
  auto y = maxpool2d(x, 2, 2);
  CHECK(y->shape == Shape{1, 1, 2, 2});
  for (double v : y->value) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("maxpool2d: hand max") {
  auto x = Tensor<double>::from({1, 1, 2, 2}, {1, 5, 3, 2});
  auto y = maxpool2d(x, 2, 2);
  CHECK(y->value[0] == doctest::Approx(5.0));
}

TEST_CASE("maxpool2d: floor division with truncated remainder") {
  auto x = Tensor<double>::zeros({1, 1, 7, 5});
  auto y = maxpool2d(x, 2, 2);
  CHECK(y->shape == Shape{1, 1, 3, 2});
}

TEST_CASE("maxpool2d: zero window rejected") {
  auto x = Tensor<double>::zeros({1, 1, 4, 4});
  CHECK_THROWS_AS(maxpool2d(x, 0, 2), std::invalid_argument);
}

// ------------------------------------------------------------------ dense

TEST_CASE("dense: zero weights and bias give zero") {
  auto x = Tensor<double>::from({1, 3}, {1, 2, 3});
  auto w = Tensor<double>::zeros({3, 2});
  auto b = Tensor<double>::zeros({2});
  auto y = dense(x, w, b);
  for (double v : y->value) CHECK(v == 0.0);
}

TEST_CASE("dense: hand affine") {
  auto x = Tensor<double>::from({1, 2}, {1, 2});
  auto w = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
  auto b = Tensor<double>::from({2}, {1, 1});
  auto y = dense(x, w, b);
  CHECK(y->value[0] == doctest::Approx(2.0));
  CHECK(y->value[1] == doctest::Approx(3.0));
}

TEST_CASE("dense: shape mismatch rejected") {
  auto x = Tensor<double>::zeros({1, 3});
  auto w = Tensor<double>::zeros({4, 2});
  auto b = Tensor<double>::zeros({2});
  CHECK_THROWS_AS(dense(x, w, b), std::invalid_argument);
}

// ------------------------------------------------------------------ bigru

TEST_CASE("bigru: all-zero weights give all-zero states") {
  RngStream rng(1, "gru0");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 3, 4, rng);
  for (auto& [k, t] : ps.items) std::fill(t->value.begin(), t->value.end(), 0.0);
  SequenceBatch<double> seq;
  seq.x = randt({2, 5, 3}, rng);
  auto out = bigru(seq, g);
  for (double v : out.outputs.x->value) CHECK(v == doctest::Approx(0.0));
  for (double v : out.fwd_final->value) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("bigru: one-dim single-step state matches the cell equations") {
  RngStream rng(2, "gru1");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 1, 1, rng);
  const double x = 0.5, wz = 1.0, wr = 0.8, wn = 1.2, un = 2.0;
  g.fwd.wz->value[0] = wz;
  g.fwd.wr->value[0] = wr;
  g.fwd.wn->value[0] = wn;
  g.fwd.un->value[0] = un;
  SequenceBatch<double> seq;
  seq.x = Tensor<double>::from({1, 1, 1}, {x});
  auto out = bigru(seq, g);
  // h0 = 0: z = sig(wz x), r = sig(wr x), n = tanh(wn x + r*0), h = (1-z) n
  const double z = 1.0 / (1.0 + std::exp(-wz * x));
  const double n = std::tanh(wn * x);
  CHECK(out.fwd_final->value[0] == doctest::Approx((1.0 - z) * n).epsilon(1e-12));
}

TEST_CASE("bigru: hidden=64 gives output feature dim 128") {
  RngStream rng(5, "gru64");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 6, 64, rng);
  SequenceBatch<double> seq;
  seq.x = randt({1, 3, 6}, rng);
  auto out = bigru(seq, g);
  CHECK(out.outputs.x->shape == Shape{1, 3, 128});
}

TEST_CASE("bigru: empty sequence rejected") {
  RngStream rng(5, "gru_e");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 2, 2, rng);
  SequenceBatch<double> seq;
  seq.x = Tensor<double>::zeros({1, 0, 2});
  CHECK_THROWS_AS(bigru(seq, g), std::invalid_argument);
}

TEST_CASE("bigru: ragged lengths freeze the forward state and zero outputs") {
  RngStream rng(6, "gru_r");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 2, 3, rng);
  SequenceBatch<double> seq;
  seq.x = randt({2, 6, 2}, rng);
  seq.valid_len = {6, 3};
  auto out = bigru(seq, g);

  // element 1: outputs zero past step 2
  for (int t = 3; t < 6; ++t)
    for (int f = 0; f < 6; ++f)
      CHECK(out.outputs.x->value[(1 * 6 + t) * 6 + f] == doctest::Approx(0.0));

  // element 1's fwd_final equals its step-2 output (first half of features)
  for (int f = 0; f < 3; ++f)
    CHECK(out.fwd_final->value[1 * 3 + f] ==
          doctest::Approx(out.outputs.x->value[(1 * 6 + 2) * 6 + f]));
}

// -------------------------------------------------------------- attention

TEST_CASE("attention: single timestep gets weight 1 and its top-down scores") {
  RngStream rng(7, "att1");
  ParamSet<double> ps;
  auto p = make_attention(ps, "a_", 5, 4, 3, rng);
  SequenceBatch<double> seq;
  seq.x = randt({2, 1, 5}, rng);
  auto out = attention_pool(seq, p);
  CHECK(out.weights->value[0] == doctest::Approx(1.0));
  CHECK(out.weights->value[1] == doctest::Approx(1.0));

  // independent evaluation of the top-down scores
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double logit = p.down_b->value[c];
      for (int j = 0; j < 4; ++j) {
        double proj = p.proj_b->value[j];
        for (int f = 0; f < 5; ++f)
          proj += seq.x->value[b * 5 + f] * p.proj_w->value[f * 4 + j];
        logit += proj * p.down_w->value[j * 3 + c];
      }
      CHECK(out.logits->value[b * 3 + c] == doctest::Approx(logit).epsilon(1e-10));
    }
}

TEST_CASE("attention: identical timesteps give uniform weights") {
  RngStream rng(8, "att2");
  ParamSet<double> ps;
  auto p = make_attention(ps, "a_", 4, 3, 2, rng);
  auto step = randt({1, 1, 4}, rng);
  SequenceBatch<double> seq;
  seq.x = Tensor<double>::zeros({1, 5, 4});
  for (int t = 0; t < 5; ++t)
    for (int f = 0; f < 4; ++f) seq.x->value[t * 4 + f] = step->value[f];
  auto out = attention_pool(seq, p);
  for (int t = 0; t < 5; ++t)
    CHECK(out.weights->value[t] == doctest::Approx(0.2));
}

TEST_CASE("attention: weights sum to 1 over valid steps for every element") {
  RngStream rng(9, "att3");
  ParamSet<double> ps;
  auto p = make_attention(ps, "a_", 4, 5, 4, rng);
  SequenceBatch<double> seq;
  seq.x = randt({3, 7, 4}, rng);
  seq.valid_len = {7, 2, 5};
  auto out = attention_pool(seq, p);
  for (int b = 0; b < 3; ++b) {
    double s = 0;
    for (int t = 0; t < 7; ++t) {
      if (t >= seq.valid_len[b])
        CHECK(out.weights->value[b * 7 + t] == doctest::Approx(0.0));
      s += out.weights->value[b * 7 + t];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("attention: all timesteps masked rejected") {
  RngStream rng(10, "att4");
  ParamSet<double> ps;
  auto p = make_attention(ps, "a_", 4, 3, 2, rng);
  SequenceBatch<double> seq;
  seq.x = randt({1, 4, 4}, rng);
  seq.valid_len = {0};
  CHECK_THROWS_WITH_AS(attention_pool(seq, p),
                       "attention_pool: all timesteps masked",
                       std::invalid_argument);
}

// ---------------------------------------------------------------- capsule

TEST_CASE("squash: zero vector stays zero") {
  auto s = Tensor<double>::zeros({1, 1, 4});
  auto v = squash_lastdim(s);
  for (double x : v->value) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("squash: unit-norm input lands at norm 0.5") {
  auto s = Tensor<double>::from({1, 1, 4}, {0.5, 0.5, 0.5, 0.5});  // |s| = 1
  auto v = squash_lastdim(s);
  double n = 0;
  for (double x : v->value) n += x * x;
  CHECK(std::sqrt(n) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("squash: norms stay strictly below 1") {
  RngStream rng(11, "sq");
  auto s = randt({2, 6, 8}, rng, -3, 3);
  auto v = squash_lastdim(s);
  for (int r = 0; r < 12; ++r) {
    double n = 0;
    for (int d = 0; d < 8; ++d) n += v->value[r * 8 + d] * v->value[r * 8 + d];
    CHECK(std::sqrt(n) < 1.0);
  }
}

TEST_CASE("routing: one input, one output, one iteration reduces to squash") {
  RngStream rng(12, "route1");
  auto u = randt({1, 1, 3}, rng);
  auto w = randt({1, 1, 3, 3}, rng);
  auto v = dynamic_routing(u, w, 1);

  // u_hat = W u; coupling over a single output capsule is forced to 1
  std::vector<double> uh(3, 0.0);
  for (int o = 0; o < 3; ++o)
    for (int d = 0; d < 3; ++d) uh[o] += w->value[o * 3 + d] * u->value[d];
  double n2 = 0;
  for (double x : uh) n2 += x * x;
  const double f = n2 / ((1 + n2) * std::sqrt(n2 + 1e-12));
  for (int o = 0; o < 3; ++o)
    CHECK(v->value[o] == doctest::Approx(uh[o] * f).epsilon(1e-9));
}

TEST_CASE("routing: coupling rows sum to 1 at every iteration") {
  RngStream rng(13, "route2");
  ParamSet<double> ps;
  auto p = make_capsule_stage(ps, "c_", 4, 3, 2, 1, 3, rng);
  auto x = randt({2, 4, 5, 3}, rng);
  RoutingTrace<double> trace;
  auto caps = capsule_stage(x, p, &trace);
  CHECK(caps.caps->shape == Shape{2, 4, 16});
  REQUIRE(!trace.couplings.empty());
  for (const auto& c : trace.couplings) {
    const int B = c->shape[0], I = c->shape[1], J = c->shape[2];
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < I; ++i) {
        double s = 0;
        for (int j = 0; j < J; ++j) s += c->value[(b * I + i) * J + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      }
  }
}

TEST_CASE("capsule_stage: shorter input than one window falls back to padding") {
  RngStream rng(14, "caps_pad");
  ParamSet<double> ps;
  auto p = make_capsule_stage(ps, "c_", 4, 3, 4, 2, 3, rng);  // window 4
  auto x = randt({1, 4, 2, 3}, rng);                          // only 2 steps
  auto caps = capsule_stage(x, p);
  CHECK(caps.caps->shape == Shape{1, 4, 16});
  CHECK(caps.level == CapsuleLevel::utterance);
}

// ------------------------------------------------------------ softmax_xent

TEST_CASE("softmax_xent: uniform logits over 4 classes give ln 4") {
  auto logits = Tensor<double>::zeros({2, 4});
  auto loss = softmax_xent(logits, {0, 3});
  CHECK(loss->value[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax_xent: confident correct logits give tiny loss") {
  auto logits = Tensor<double>::from({1, 2}, {10, -10});
  auto loss = softmax_xent(logits, {0});
  CHECK(loss->value[0] == doctest::Approx(2.0611536181902037e-9).epsilon(1e-6));
}

TEST_CASE("softmax_xent: out-of-range label rejected") {
  auto logits = Tensor<double>::zeros({1, 3});
  CHECK_THROWS_AS(softmax_xent(logits, {3}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_xent(logits, {-1}), std::invalid_argument);
}

// --------------------------------------------------- gradients vs the oracle

TEST_CASE("gradients: conv2d (with fused relu) matches finite differences") {
  RngStream rng(21, "fd_conv");
  auto x = randt({2, 2, 5, 6}, rng);
  auto w = xavier_init<double>({3, 2, 2, 3}, rng);
  auto b = randt({3}, rng, 0.05, 0.3);  // biases away from the relu kink
  auto build = [&] { return sum(conv2d(x, w, b)); };
  CHECK(fdtest::fd_param(x, build) < 1e-6);
  CHECK(fdtest::fd_param(w, build) < 1e-6);
  CHECK(fdtest::fd_param(b, build) < 1e-6);
}

TEST_CASE("gradients: maxpool2d matches finite differences") {
  RngStream rng(22, "fd_pool");
  auto x = randt({2, 2, 6, 6}, rng);
  auto build = [&] { return sum(mul(maxpool2d(x, 2, 3), maxpool2d(x, 2, 3))); };
  CHECK(fdtest::fd_param(x, build) < 1e-6);
}

TEST_CASE("gradients: dense matches finite differences") {
  RngStream rng(23, "fd_dense");
  auto x = randt({3, 4}, rng);
  auto w = xavier_init<double>({4, 5}, rng);
  auto b = randt({5}, rng, 0.1, 0.5);
  auto build = [&] {
    return sum(dense(x, w, b, Activation::relu));
  };
  CHECK(fdtest::fd_param(x, build) < 1e-6);
  CHECK(fdtest::fd_param(w, build) < 1e-6);
}

TEST_CASE("gradients: bigru matches finite differences") {
  RngStream rng(24, "fd_gru");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 3, 4, rng);
  auto x = randt({2, 4, 3}, rng);
  SequenceBatch<double> seq;
  seq.x = x;
  seq.valid_len = {4, 3};
  auto build = [&] {
    auto out = bigru(seq, g);
    return sum(add(sum(mul(out.outputs.x, out.outputs.x)),
                   add(sum(out.fwd_final), sum(out.bwd_first))));
  };
  CHECK(fdtest::fd_param(x, build) < 1e-6);
  CHECK(fdtest::fd_param(g.fwd.wn, build) < 1e-6);
  CHECK(fdtest::fd_param(g.bwd.uz, build) < 1e-6);
  CHECK(fdtest::fd_param(g.fwd.bhn, build) < 1e-6);
}

TEST_CASE("gradients: attention matches finite differences") {
  RngStream rng(25, "fd_att");
  ParamSet<double> ps;
  auto p = make_attention(ps, "a_", 4, 3, 2, rng);
  SequenceBatch<double> seq;
  seq.x = randt({2, 5, 4}, rng);
  seq.valid_len = {5, 3};
  auto build = [&] {
    auto out = attention_pool(seq, p);
    return sum(mul(out.logits, out.logits));
  };
  CHECK(fdtest::fd_param(seq.x, build) < 1e-6);
  CHECK(fdtest::fd_param(p.proj_w, build) < 1e-6);
  CHECK(fdtest::fd_param(p.up_w, build) < 1e-6);
  CHECK(fdtest::fd_param(p.down_w, build) < 1e-6);
}

TEST_CASE("gradients: capsule stage matches finite differences") {
  RngStream rng(26, "fd_caps");
  ParamSet<double> ps;
  auto p = make_capsule_stage(ps, "c_", 3, 2, 2, 1, 3, rng);
  auto x = randt({1, 3, 4, 2}, rng);
  auto build = [&] {
    auto caps = capsule_stage(x, p);
    return sum(mul(caps.caps, caps.caps));
  };
  // h = 1e-4: the routing composition is deep enough that smaller steps are
  // dominated by cancellation noise rather than truncation.
  CHECK(fdtest::fd_param(x, build, 1e-4) < 1e-4);
  CHECK(fdtest::fd_param(p.head_w, build, 1e-4) < 1e-4);
  CHECK(fdtest::fd_param(p.win_w, build, 1e-4) < 1e-4);
  CHECK(fdtest::fd_param(p.utt_w, build, 1e-4) < 1e-4);
}

TEST_CASE("gradients: softmax_xent matches finite differences within 1e-6") {
  RngStream rng(27, "fd_xent");
  auto logits = randt({3, 4}, rng, -2, 2);
  std::vector<int> labels = {0, 2, 3};
  auto build = [&] { return softmax_xent(logits, labels); };
  CHECK(fdtest::fd_param(logits, build) < 1e-6);
}

// -------------------------------------------- arbitrary sequence lengths

TEST_CASE("sequence ops accept any time length above the minimum") {
  RngStream rng(30, "len");
  ParamSet<double> ps;
  auto g = make_gru(ps, "g_", 3, 2, rng);
  auto a = make_attention(ps, "a_", 4, 3, 2, rng);
  auto c = make_capsule_stage(ps, "c_", 2, 3, 3, 2, 2, rng);
  for (int t = 1; t <= 6; ++t) {
    SequenceBatch<double> seq;
    seq.x = randt({1, t, 3}, rng);
    auto gout = bigru(seq, g);
    CHECK(gout.outputs.x->shape == Shape{1, t, 4});
    auto aout = attention_pool(gout.outputs, a);
    CHECK(aout.logits->shape == Shape{1, 2});
    auto fm = randt({1, 2, t, 3}, rng);
    auto caps = capsule_stage(fm, c);
    CHECK(caps.caps->shape == Shape{1, 4, 16});
  }
}
