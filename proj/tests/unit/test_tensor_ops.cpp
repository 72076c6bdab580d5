// tests/unit/test_tensor_ops.cpp

// Copyright 2026 The crnnse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>
#include <vector>

#include "crnnse/ops.hpp"
#include "doctest.h"

using namespace crnnse;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.data()(i) = u(rng);
  return t;
}

// Output positions counted one by one: i is valid while the dilated kernel fits.
Index brute_force_extent(Index input, Index kernel, Index stride, Index dilation) {
  Index n = 0;
  for (Index i = 0; i * stride + (kernel - 1) * dilation < input; ++i) ++n;
  return n;
}

// Direct loops over the definition of the unpadded dilated, strided convolution.
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>& b, Stride2 s,
                              Dilation2 d) {
  const Index ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const Index ho = brute_force_extent(h, kh, s.h, d.h), wo = brute_force_extent(w, kw, s.w, d.w);
  Tensor<double> y({co, ho, wo});
  for (Index o = 0; o < co; ++o)
    for (Index i = 0; i < ho; ++i)
      for (Index j = 0; j < wo; ++j) {
        double acc = b.data()(o);
        for (Index c = 0; c < ci; ++c)
          for (Index p = 0; p < kh; ++p)
            for (Index q = 0; q < kw; ++q)
              acc += k.data()(((o * ci + c) * kh + p) * kw + q) *
                     x.data()((c * h + i * s.h + p * d.h) * w + j * s.w + q * d.w);
        y.data()((o * ho + i) * wo + j) = acc;
      }
  return y;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor<double> t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(shape_size(t.shape()) == t.size());
  CHECK_FALSE(t.has_grad());
  t.zero_grad();
  CHECK(t.grad().size() == t.size());
  CHECK_THROWS_AS(Tensor<double>({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, Vector<double>::Zero(3)), DimensionError);
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  std::mt19937_64 rng(1);
  Graph<double> g;
  Tensor<double> x = random_tensor({1, 6, 5}, rng);
  Tensor<double> k({1, 1, 1, 1});
  k.data()(0) = 1.0;
  Tensor<double> b({1});
  auto y = conv2d(g.constant(x), g.constant(k), g.constant(b), {1, 1}, {1, 1});
  CHECK(y.shape() == x.shape());
  CHECK((y.value().data() - x.data()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv2d output shape for the first paper layer") {
  Graph<double> g;
  auto y = conv2d(g.constant(Tensor<double>({1, 256, 8})), g.constant(Tensor<double>({16, 1, 7, 5})),
                  g.constant(Tensor<double>({16})), {3, 1}, {2, 1});
  CHECK(y.shape() == Shape{16, 82, 4});
  CHECK(brute_force_extent(256, 7, 3, 2) == 82);
  CHECK(brute_force_extent(8, 5, 1, 1) == 4);
}

TEST_CASE("conv2d on zero input is the bias") {
  std::mt19937_64 rng(2);
  Graph<double> g;
  Tensor<double> b = random_tensor({3}, rng);
  auto y = conv2d(g.constant(Tensor<double>({2, 9, 7})), g.constant(random_tensor({3, 2, 3, 2}, rng)),
                  g.constant(b), {2, 1}, {2, 1});
  const Index per = y.size() / 3;
  for (Index o = 0; o < 3; ++o) {
    for (Index i = 0; i < per; ++i) CHECK(y.value().data()(o * per + i) == b.data()(o));
  }
}

TEST_CASE("conv2d shape algebra and values over random valid shapes") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(1, 3), ext(1, 4), in(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const Index ci = small(rng), co = small(rng);
    const Index kh = ext(rng), kw = ext(rng), sh = small(rng), sw = small(rng), dh = small(rng), dw = small(rng);
    const Index h = (kh - 1) * dh + 1 + in(rng) - 1, w = (kw - 1) * dw + 1 + in(rng) - 1;
    Tensor<double> x = random_tensor({ci, h, w}, rng), k = random_tensor({co, ci, kh, kw}, rng),
                   b = random_tensor({co}, rng);
    Graph<double> g;
    auto y = conv2d(g.constant(x), g.constant(k), g.constant(b), {sh, sw}, {dh, dw});
    REQUIRE(y.shape() == Shape{co, conv_output_extent(h, kh, sh, dh), conv_output_extent(w, kw, sw, dw)});
    CHECK(y.shape()[1] == brute_force_extent(h, kh, sh, dh));
    CHECK(y.shape()[2] == brute_force_extent(w, kw, sw, dw));
    const Tensor<double> ref = conv_reference(x, k, b, {sh, sw}, {dh, dw});
    CHECK((y.value().data() - ref.data()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv2d rejects kernels wider than the input") {
  Graph<double> g;
  CHECK_THROWS_AS(conv2d(g.constant(Tensor<double>({1, 10, 4})), g.constant(Tensor<double>({1, 1, 3, 5})),
                         g.constant(Tensor<double>({1})), {1, 1}, {1, 1}),
                  DimensionError);
  CHECK_THROWS_AS(conv2d(g.constant(Tensor<double>({2, 10, 4})), g.constant(Tensor<double>({1, 1, 3, 3})),
                         g.constant(Tensor<double>({1})), {1, 1}, {1, 1}),
                  DimensionError);
  try {
    conv2d(g.constant(Tensor<double>({1, 4, 10})), g.constant(Tensor<double>({1, 1, 3, 1})),
           g.constant(Tensor<double>({1})), {1, 1}, {2, 1});
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("height") != std::string::npos);
  }
}

TEST_CASE("lstm_step with zero parameters") {
  const Index n = 3, nin = 2;
  Tensor<double> wih({4 * n, nin}), whh({4 * n, n}), bias({4 * n});
  Tensor<double> x({nin}), h({n}), c({n});
  c.data() << 0.7, -1.2, 2.0;
  Graph<double> g;
  LstmWeights<double> w{g.constant(wih), g.constant(whh), g.constant(bias)};
  auto s = lstm_step(g.constant(x), g.constant(h), g.constant(c), w);
  for (Index i = 0; i < n; ++i) {
    CHECK(s.c.value().data()(i) == doctest::Approx(0.5 * c.data()(i)).epsilon(1e-15));
    CHECK(s.h.value().data()(i) == doctest::Approx(0.5 * std::tanh(0.5 * c.data()(i))).epsilon(1e-15));
  }
  Graph<double> g0;
  LstmWeights<double> w0{g0.constant(wih), g0.constant(whh), g0.constant(bias)};
  auto z = lstm_step(g0.constant(x), g0.constant(h), g0.constant(Tensor<double>({n})), w0);
  CHECK(z.c.value().data().cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.h.value().data().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm_step rejects inconsistent dimensions") {
  Graph<double> g;
  LstmWeights<double> w{g.constant(Tensor<double>({12, 2})), g.constant(Tensor<double>({12, 3})),
                        g.constant(Tensor<double>({12}))};
  CHECK_THROWS_AS(lstm_step(g.constant(Tensor<double>({4})), g.constant(Tensor<double>({3})),
                            g.constant(Tensor<double>({3})), w),
                  DimensionError);
  CHECK_THROWS_AS(lstm_step(g.constant(Tensor<double>({2})), g.constant(Tensor<double>({2})),
                            g.constant(Tensor<double>({3})), w),
                  DimensionError);
}

TEST_CASE("mse_loss examples") {
  Graph<double> g;
  Tensor<double> a({2}), z({2});
  a.data() << 1.0, 1.0;
  CHECK(mse_loss(g.constant(a), g.constant(a)).item() == 0.0);
  CHECK(mse_loss(g.constant(a), g.constant(z)).item() == 2.0);
  CHECK_THROWS_AS(mse_loss(g.constant(a), g.constant(Tensor<double>({3}))), DimensionError);
}

TEST_CASE("cross_entropy examples") {
  Graph<double> g;
  Tensor<double> uniform({1, 857});
  const std::vector<int> t0{5};
  CHECK(cross_entropy(g.constant(uniform), t0).item() == doctest::Approx(6.75343791859778).epsilon(1e-13));

  Tensor<double> peaked({1, 4});
  peaked.data()(2) = 30.0;
  const std::vector<int> t2{2};
  CHECK(cross_entropy(g.constant(peaked), t2).item() < 1e-9);

  // Frozen from a direct softmax evaluation: ((ln(e+2)-1) + (ln(e^2+2)-2)) / 2.
  Tensor<double> l({2, 3});
  l.data() << 1, 0, 0, 0, 2, 0;
  const std::vector<int> t{0, 1};
  CHECK(cross_entropy(g.constant(l), t).item() == doctest::Approx(0.3954947400769675).epsilon(1e-14));

  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(cross_entropy(g.constant(l), bad), PreconditionError);
}

TEST_CASE("losses are non-negative on random inputs") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    Graph<double> g;
    const Tensor<double> p = random_tensor({3, 5}, rng), q = random_tensor({3, 5}, rng);
    CHECK(mse_loss(g.constant(p), g.constant(q)).item() > 0.0);
    const std::vector<int> t{cls(rng), cls(rng), cls(rng)};
    CHECK(cross_entropy(g.constant(p), t).item() >= 0.0);
  }
}

TEST_CASE("forward values are deterministic") {
  std::mt19937_64 r1(9), r2(9);
  const Tensor<double> x1 = random_tensor({1, 20, 6}, r1), k1 = random_tensor({2, 1, 3, 3}, r1);
  const Tensor<double> x2 = random_tensor({1, 20, 6}, r2), k2 = random_tensor({2, 1, 3, 3}, r2);
  Graph<double> g1, g2;
  auto y1 = relu(conv2d(g1.constant(x1), g1.constant(k1), g1.constant(Tensor<double>({2})), {2, 1}, {2, 1}));
  auto y2 = relu(conv2d(g2.constant(x2), g2.constant(k2), g2.constant(Tensor<double>({2})), {2, 1}, {2, 1}));
  CHECK(y1.value().data() == y2.value().data());
}
