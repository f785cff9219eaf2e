#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sernas/ad/adam.hpp"
#include "sernas/ad/finite_diff.hpp"
#include "sernas/ad/init.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/ad/params.hpp"
#include "sernas/ad/rng.hpp"
#include "sernas/ad/tensor.hpp"

using namespace sernas;
using namespace sernas::ad;

TEST_CASE("backward: sum of a vector gives ones") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x->requires_grad = true;
  auto loss = sum(x);
  backward(loss);
  REQUIRE(x->has_grad());
  for (int i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(1.0));
}

TEST_CASE("backward: quadratic gives 2x") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x->requires_grad = true;
  auto loss = sum(mul(x, x));
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(x->grad[1] == doctest::Approx(4.0));
  CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: detached leaf receives no gradient") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x->requires_grad = true;
  auto a = Tensor<double>::from({3}, {2, 2, 2});  // no grad
  auto loss = sum(mul(a, x));
  backward(loss);
  CHECK_FALSE(a->has_grad());
  CHECK(x->grad[0] == doctest::Approx(2.0));
}

TEST_CASE("backward: non-scalar loss rejected") {
  auto x = Tensor<double>::from({2}, {1, 2});
  x->requires_grad = true;
  auto y = mul(x, x);
  CHECK_THROWS_WITH_AS(backward(y), "gradient source must be scalar",
                       std::invalid_argument);
}

TEST_CASE("backward: gradients accumulate additively across fan-out") {
  auto x = Tensor<double>::from({2}, {3, 4});
  x->requires_grad = true;
  auto y = add(x, x);  // dy/dx = 2
  auto loss = sum(y);
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(x->grad[1] == doctest::Approx(2.0));
}

TEST_CASE("repeated forward passes are bit-identical") {
  RngStream rng(42, "repeat");
  auto x = Tensor<double>::zeros({4, 5});
  for (auto& v : x->value) v = rng.uniform(-1, 1);
  auto w = xavier_init<double>({5, 3}, rng);
  auto b = Tensor<double>::zeros({3});
  auto r1 = add_rowvec(matmul(x, w), b);
  auto r2 = add_rowvec(matmul(x, w), b);
  for (size_t i = 0; i < r1->value.size(); ++i)
    CHECK(r1->value[i] == r2->value[i]);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamSet<double> ps;
  auto p = ps.add("p", Tensor<double>::from({2}, {1.5, -0.5}));
  p->ensure_grad();
  AdamState<double> adam;
  adam.step({p}, 0.001);
  CHECK(p->value[0] == 1.5);
  CHECK(p->value[1] == -0.5);
}

TEST_CASE("adam: bias-corrected first step") {
  // p = 1, g = 0.5, lr = 1e-3: mhat = g, vhat = g^2, so
  // p' = 1 - lr * g/(g + eps) ~= 0.999
  ParamSet<double> ps;
  auto p = ps.add("p", Tensor<double>::from({1}, {1.0}));
  p->ensure_grad();
  p->grad[0] = 0.5;
  AdamState<double> adam;
  adam.step({p}, 0.001);
  CHECK(p->value[0] == doctest::Approx(0.999).epsilon(1e-9));
  CHECK(p->grad[0] == 0.0);  // cleared afterward
}

TEST_CASE("adam: default hyperparameters") {
  AdamState<double> adam;
  CHECK(adam.beta1 == 0.9);
  CHECK(adam.beta2 == 0.999);
  CHECK(adam.epsilon == 1e-8);
}

TEST_CASE("adam: learning rate 0 is a bit-identical no-op on parameters") {
  RngStream rng(7, "adam0");
  ParamSet<double> ps;
  auto p = ps.add("w", xavier_init<double>({4, 4}, rng));
  auto before = p->value;
  AdamState<double> adam;
  for (int step = 0; step < 3; ++step) {
    p->ensure_grad();
    for (auto& g : p->grad) g = rng.uniform(-1, 1);
    adam.step({p}, 0.0);
  }
  for (size_t i = 0; i < before.size(); ++i) CHECK(p->value[i] == before[i]);
}

TEST_CASE("adam: missing gradient names the parameter") {
  ParamSet<double> ps;
  auto p = ps.add("conv1/w", Tensor<double>::from({1}, {1.0}));
  AdamState<double> adam;
  CHECK_THROWS_WITH_AS(adam.step({p}, 1e-3),
                       "adam: missing gradient for parameter conv1/w",
                       std::runtime_error);
}

TEST_CASE("xavier: deterministic given the seed") {
  RngStream a(123, "init"), b(123, "init");
  auto t1 = xavier_init<double>({10, 10}, a);
  auto t2 = xavier_init<double>({10, 10}, b);
  for (size_t i = 0; i < t1->value.size(); ++i) CHECK(t1->value[i] == t2->value[i]);
}

TEST_CASE("xavier: empirical variance matches 2/(fan_in+fan_out)") {
  RngStream rng(99, "var");
  auto t = xavier_init<double>({100, 100}, rng);  // 10k samples
  double mean = 0, m2 = 0;
  for (double v : t->value) mean += v;
  mean /= static_cast<double>(t->value.size());
  for (double v : t->value) m2 += (v - mean) * (v - mean);
  const double var = m2 / static_cast<double>(t->value.size());
  const double target = 2.0 / 200.0;
  CHECK(var > target * 0.9);
  CHECK(var < target * 1.1);
}

TEST_CASE("xavier: 1x1 stays within the closed-form bound") {
  const double bound = std::sqrt(3.0);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed, "bound");
    auto t = xavier_init<double>({1, 1}, rng);
    CHECK(std::abs(t->value[0]) <= bound);
  }
}

TEST_CASE("xavier: zero-sized dimension rejected") {
  RngStream rng(1, "z");
  CHECK_THROWS_AS(xavier_init<double>({0, 4}, rng), std::invalid_argument);
}

TEST_CASE("finite differences: linear function is exact") {
  auto x = Tensor<double>::from({3}, {0.3, -0.7, 1.1});
  x->requires_grad = true;
  auto f = [](const TensorPtr<double>& in) {
    NoGradGuard g;
    auto y = sum(scale(in, 3.0));
    return static_cast<double>(y->value[0]);
  };
  auto loss = sum(scale(x, 3.0));
  backward(loss);
  CHECK(finite_diff_check<double>(f, x, x->grad, 1e-5) < 1e-10);
}

TEST_CASE("finite differences: quadratic within 1e-7") {
  auto x = Tensor<double>::from({2}, {1.0, 2.0});
  x->requires_grad = true;
  auto f = [](const TensorPtr<double>& in) {
    NoGradGuard g;
    return sum(mul(in, in))->value[0];
  };
  auto loss = sum(mul(x, x));
  backward(loss);
  CHECK(finite_diff_check<double>(f, x, x->grad, 1e-4) < 1e-7);
}

TEST_CASE("finite differences: non-finite function value rejected") {
  auto x = Tensor<double>::from({1}, {0.0});
  auto f = [](const TensorPtr<double>& in) {
    return std::log(in->value[0] - 10.0);  // NaN everywhere near 0
  };
  std::vector<double> fake(1, 0.0);
  CHECK_THROWS_AS(finite_diff_check<double>(f, x, fake, 1e-5), std::runtime_error);
}

TEST_CASE("rng: streams are independent and reproducible") {
  RngStream root(2024, "root");
  auto a1 = root.split("dataset");
  auto b = root.split("init");
  auto a2 = root.split("dataset");
  // same name -> same stream, regardless of draws on siblings
  (void)b.next_u64();
  for (int i = 0; i < 8; ++i) CHECK(a1.next_u64() == a2.next_u64());
  // different names -> different sequences
  RngStream c1(2024, "x"), c2(2024, "y");
  bool any_diff = false;
  for (int i = 0; i < 8; ++i) any_diff |= (c1.next_u64() != c2.next_u64());
  CHECK(any_diff);
}

TEST_CASE("param set: duplicate ids rejected") {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>::zeros({2}));
  CHECK_THROWS_AS(ps.add("w", Tensor<double>::zeros({2})), std::invalid_argument);
}

TEST_CASE("no-grad mode records no graph") {
  auto x = Tensor<double>::from({2}, {1, 2});
  x->requires_grad = true;
  NoGradGuard g;
  auto y = mul(x, x);
  CHECK_FALSE(y->requires_grad);
  CHECK(y->parents.empty());
}
