// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "ravg/rng.hpp"
#include "ravg/tensor.hpp"

using namespace ravg;

namespace {

template <class S>
TensorT<S> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  TensorT<S> t = TensorT<S>::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<S>(scale * rng::normal(rng::hash3(seed, i, 0),
                                                     rng::hash3(seed, i, 1)));
  return t;
}

}  // namespace

TEST_CASE("elementwise add/sub/mul/div basics") {
  auto a = Tensor::from({2}, {1.f, 2.f});
  auto b = Tensor::from({2}, {3.f, 4.f});
  auto s = add(a, b);
  CHECK(s.values() == std::vector<float>{4.f, 6.f});
  CHECK(sub(b, a).values() == std::vector<float>{2.f, 2.f});
  CHECK(mul(a, b).values() == std::vector<float>{3.f, 8.f});
  auto q = div(b, a);
  CHECK(q.values()[0] == doctest::Approx(3.f));
  CHECK(q.values()[1] == doctest::Approx(2.f));
  CHECK_THROWS_AS(add(a, Tensor::from({3}, {1.f, 2.f, 3.f})), ShapeError);
}

TEST_CASE("elementwise max/min with first-operand tie rule") {
  auto a = Tensor::from({2}, {1.f, 5.f});
  auto b = Tensor::from({2}, {3.f, 2.f});
  CHECK(maximum(a, b).values() == std::vector<float>{3.f, 5.f});
  CHECK(minimum(a, b).values() == std::vector<float>{1.f, 2.f});
}

TEST_CASE("div guards the denominator") {
  auto a = Tensor::from({2}, {1.f, -1.f});
  auto b = Tensor::from({2}, {0.f, 0.f});
  auto q = div(a, b);
  CHECK(std::isfinite(q.values()[0]));
  CHECK(std::isfinite(q.values()[1]));
}

TEST_CASE("backward of mul: f = sum(x*x)") {
  auto x = Tensor::from({2}, {1.f, 2.f});
  x.set_requires_grad(true);
  auto f = sum(mul(x, x));
  backward(f);
  CHECK(x.grad()[0] == doctest::Approx(2.f));
  CHECK(x.grad()[1] == doctest::Approx(4.f));
}

TEST_CASE("reduce: sum and mean") {
  auto a = Tensor::from({3}, {1.f, 2.f, 3.f});
  CHECK(sum(a).item() == doctest::Approx(6.f));
  auto ones = Tensor::full({2, 3}, 1.f);
  auto m = mean(ones, {1});
  CHECK(m.shape() == Shape{2});
  CHECK(m.values() == std::vector<float>{1.f, 1.f});
  CHECK_THROWS_AS(sum(a, {3}), ShapeError);
}

TEST_CASE("reduce max gradient routes to the first extremal element") {
  auto x = Tensor::from({3}, {1.f, 5.f, 5.f});
  x.set_requires_grad(true);
  auto f = reduce_max(x);
  CHECK(f.item() == doctest::Approx(5.f));
  backward(f);
  CHECK(x.grad() == std::vector<float>{0.f, 1.f, 0.f});

  // Away from the tie the rule must agree with finite differences.
  auto err = grad_check<double>(
      [](DTensor& t) { return reduce_max(t); },
      DTensor::from({3}, {1.0, 5.0, 2.0}));
  CHECK(err < 1e-7);
}

TEST_CASE("backward: sum gives ones, relu masks") {
  auto x = Tensor::from({2, 2}, {1.f, -2.f, 3.f, -4.f});
  x.set_requires_grad(true);
  auto f = sum(x);
  backward(f);
  CHECK(x.grad() == std::vector<float>(4, 1.f));

  auto y = Tensor::from({2}, {-1.f, 1.f});
  y.set_requires_grad(true);
  auto g = sum(relu(y));
  backward(g);
  CHECK(y.grad() == std::vector<float>{0.f, 1.f});
}

TEST_CASE("backward requires a scalar loss") {
  auto x = Tensor::from({2}, {1.f, 2.f});
  x.set_requires_grad(true);
  auto y = mul(x, 2.0);
  CHECK_THROWS_AS(backward(y), ShapeError);
  Tape::current().clear();
}

TEST_CASE("activations: relu, sigmoid, softmax") {
  auto r = relu(Tensor::from({2}, {-1.f, 2.f}));
  CHECK(r.values() == std::vector<float>{0.f, 2.f});
  CHECK(sigmoid(Tensor::scalar(0.f)).item() == doctest::Approx(0.5f));
  auto sm = softmax(Tensor::from({2}, {0.f, 0.f}), 0);
  CHECK(sm.values()[0] == doctest::Approx(0.5f));
  CHECK(sm.values()[1] == doctest::Approx(0.5f));
  // softmax output is strictly positive (within the representable range)
  auto sm2 = softmax(Tensor::from({3}, {-10.f, 0.f, 10.f}), 0);
  for (float v : sm2.values()) CHECK(v > 0.f);
}

TEST_CASE("shape ops: concat, slice/pad round trip, stack") {
  auto a = Tensor::from({1}, {1.f});
  auto b = Tensor::from({1}, {2.f});
  CHECK(concat<float>({a, b}, 0).values() == std::vector<float>{1.f, 2.f});

  auto x = Tensor::from({4}, {1.f, 2.f, 3.f, 4.f});
  auto padded = pad_zero(x, 0, 2, 3);
  CHECK(padded.size() == 9);
  auto back = slice(padded, 0, 2, 4);
  CHECK(back.values() == x.values());
  CHECK_THROWS_AS(slice(x, 0, 3, 2), ShapeError);

  std::vector<Tensor> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(Tensor::full({3, 4, 4}, float(i)));
  auto st = stack(frames);
  CHECK(st.shape() == Shape{5, 3, 4, 4});
  auto parts = unstack(st);
  CHECK(parts.size() == 5);
  CHECK(parts[2].shape() == Shape{3, 4, 4});
  CHECK(parts[2].values() == frames[2].values());
}

TEST_CASE("grad_check: f = sum(x^2)") {
  auto err = grad_check<double>(
      [](DTensor& x) { return sum(mul(x, x)); },
      random_tensor<double>({3, 4}, 11));
  CHECK(err < 1e-7);
}

TEST_CASE("gradient suite: elementwise and reductions in 64-bit") {
  auto x0 = random_tensor<double>({4, 5}, 21);
  auto y0 = random_tensor<double>({4, 5}, 22);

  auto check = [&](const char* name, std::function<DTensor(DTensor&)> f,
                   DTensor x, double tol = 1e-5) {
    auto err = grad_check<double>(f, std::move(x));
    INFO(name);
    CHECK(err < tol);
  };

  check("add", [&](DTensor& x) { return sum(add(x, y0)); }, x0.clone());
  check("sub", [&](DTensor& x) { return sum(sub(x, y0)); }, x0.clone());
  check("mul", [&](DTensor& x) { return sum(mul(x, y0)); }, x0.clone());
  check("div", [&](DTensor& x) { return sum(div(x, y0)); }, x0.clone());
  check("div_denom", [&](DTensor& x) { return sum(div(y0, x)); }, x0.clone());
  check("exp", [&](DTensor& x) { return sum(ravg::exp(x)); }, x0.clone());
  check("log", [&](DTensor& x) { return sum(ravg::log(add(mul(x, x), 0.5))); }, x0.clone());
  check("abs", [&](DTensor& x) { return sum(ravg::abs(x)); }, x0.clone());
  check("pow2", [&](DTensor& x) { return sum(ravg::pow(x, 2.0)); }, x0.clone());
  check("clamp", [&](DTensor& x) { return sum(clamp(x, -0.5, 0.5)); },
        random_tensor<double>({4, 5}, 23));
  check("leaky", [&](DTensor& x) { return sum(leaky_relu(x)); }, x0.clone());
  check("sigmoid", [&](DTensor& x) { return sum(mul(sigmoid(x), y0)); }, x0.clone());
  check("softmax", [&](DTensor& x) { return sum(mul(softmax(x, 0), y0)); }, x0.clone());
  check("mean_axis", [&](DTensor& x) { return sum(mul(mean(x, {1}), mean(y0, {1}))); }, x0.clone());
  check("sum_axis", [&](DTensor& x) { return sum(mul(sum(x, {0}), sum(y0, {0}))); }, x0.clone());
  check("min_reduce", [&](DTensor& x) { return sum(reduce_min(x, {1})); }, x0.clone());
  check("concat", [&](DTensor& x) { return sum(mul(concat<double>({x, x}, 0), 0.75)); }, x0.clone());
  check("slice", [&](DTensor& x) { return sum(slice(x, 1, 1, 3)); }, x0.clone());
  check("pad", [&](DTensor& x) { return sum(mul(pad_zero(x, 0, 1, 2), 2.0)); }, x0.clone());
  check("reshape", [&](DTensor& x) { return sum(mul(reshape(x, {20}), reshape(y0, {20}))); }, x0.clone());
}

TEST_CASE("determinism: identical runs produce bit-identical outputs") {
  auto run = [] {
    auto x = random_tensor<float>({2, 3, 8, 8}, 31);
    auto y = sigmoid(mul(x, 1.25));
    auto z = softmax(y, 1);
    return z.values();
  };
  CHECK(run() == run());
}

TEST_CASE("rng: deterministic and roughly uniform") {
  CHECK(rng::hash3(1, 2, 3) == rng::hash3(1, 2, 3));
  CHECK(rng::hash3(1, 2, 3) != rng::hash3(1, 2, 4));
  double acc = 0, acc2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng::uniform01(rng::hash2(7, static_cast<std::uint64_t>(i)));
    acc += u;
    acc2 += u * u;
  }
  const double mean_u = acc / n;
  const double var_u = acc2 / n - mean_u * mean_u;
  CHECK(mean_u == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var_u == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}
