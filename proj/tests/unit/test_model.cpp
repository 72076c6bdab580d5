// tests/unit/test_model.cpp

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

#include "crnnse/model.hpp"
#include "doctest.h"

using namespace crnnse;

namespace {

RowMatrix<double> random_frames(Index T, Index D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  RowMatrix<double> m(T, D);
  for (Index i = 0; i < T; ++i)
    for (Index j = 0; j < D; ++j) m(i, j) = u(rng);
  return m;
}

void zero_all(ModelParams<double>& p) {
  for (auto* t : p.all_tensors()) t->data().setZero();
}

}  // namespace

TEST_CASE("presets and conv geometry") {
  const ModelConfig paper = ModelConfig::preset("paper");
  const auto shapes = paper.crnn.conv_shapes();
  REQUIRE(shapes.size() == 3u);
  CHECK(shapes[0] == std::array<Index, 3>{16, 82, 4});
  CHECK(shapes[1] == std::array<Index, 3>{32, 25, 2});
  CHECK(shapes[2] == std::array<Index, 3>{64, 6, 2});
  CHECK(paper.crnn.conv_output_size() == 768);
  CHECK(paper.crnn.hidden == 1072);
  CHECK(paper.crnn.lstm_layers == 2);
  CHECK(paper.crnn.context_frames == 8);
  CHECK(paper.lm.vocab_size == 857);
  CHECK(paper.lm.classes() == 858);
  CHECK(paper.crnn.conv_activation == "relu");
  CHECK(paper.crnn.output_activation == "softplus");
  CHECK_THROWS_AS(ModelConfig::preset("huge"), ConfigError);

  const ModelConfig desk = ModelConfig::preset("desk");
  CHECK(ModelConfig::from_kv(desk.to_kv()).to_kv().dump() == desk.to_kv().dump());

  KeyValueConfig kv;
  kv.set("model.conv0", "4,300,5,3,1,2,1");
  CHECK_THROWS_AS(ModelConfig::from_kv(kv), ConfigError);
  KeyValueConfig short_list;
  short_list.set("model.conv1", "4,3");
  CHECK_THROWS_AS(ModelConfig::from_kv(short_list), ConfigError);
  KeyValueConfig act;
  act.set("model.conv_activation", "tanh");
  CHECK_THROWS_AS(ModelConfig::from_kv(act), ConfigError);
}

TEST_CASE("context window layout") {
  const RowMatrix<double> f = random_frames(100, 256, 1);
  const CrnnConfig cfg = ModelConfig::preset("paper").crnn;
  const RowMatrix<double> w = context_window(f, 50, cfg);
  CHECK(w.rows() == 256);
  CHECK(w.cols() == 8);
  for (Index j = 0; j < 8; ++j) CHECK(w.col(j) == f.row(46 + j).transpose());

  const RowMatrix<double> w0 = context_window(f, 0, cfg);
  CHECK(w0.leftCols(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(w0.col(4) == f.row(0).transpose());
  const RowMatrix<double> last = context_window(f, 99, cfg);
  CHECK(last.rightCols(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(last.col(4) == f.row(99).transpose());

  CHECK_THROWS_AS(context_window(f, 100, cfg), PreconditionError);
  CHECK_THROWS_AS(context_window(f, -1, cfg), PreconditionError);
}

TEST_CASE("conv stack on zero input with zero biases is zero") {
  ModelConfig cfg = ModelConfig::preset("paper");
  cfg.crnn.hidden = 4;
  cfg.lm.vocab_size = 4;
  cfg.lm.embed_dim = 2;
  auto p = init_params<double>(cfg, 3);
  Graph<double> g(false);
  const auto y = conv_stack_forward(g.constant(Tensor<double>({1, 256, 8})), p.crnn, cfg.crnn);
  CHECK(y.shape() == Shape{768});
  CHECK(y.value().data().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(conv_stack_forward(g.constant(Tensor<double>({1, 256, 7})), p.crnn, cfg.crnn), DimensionError);
}

TEST_CASE("crnn_forward shapes and zero parameters") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 4);
  for (Index T : {1, 2, 9, 30}) {
    Graph<double> g(false);
    const auto out = crnn_forward(g, random_frames(T, 256, T), p.crnn, cfg.crnn);
    CHECK(out.denoised.shape() == Shape{T, 256});
    CHECK(out.denoised.value().data().minCoeff() >= 0.0);
    CHECK(out.denoised.value().data().allFinite());
    CHECK(out.final.layers.size() == 2u);
    CHECK(out.final.top_h().shape() == Shape{cfg.crnn.hidden});
  }

  zero_all(p);
  Graph<double> g(false);
  const auto out = crnn_forward(g, random_frames(15, 256, 5), p.crnn, cfg.crnn);
  const double ln2 = std::log(2.0);
  CHECK((out.denoised.value().data().array() - ln2).abs().maxCoeff() < 1e-15);
  CHECK(out.final.top_h().value().data().cwiseAbs().maxCoeff() == 0.0);

  Graph<double> g2(false);
  CHECK_THROWS_AS(crnn_forward(g2, random_frames(5, 255, 1), p.crnn, cfg.crnn), DimensionError);
  CHECK_THROWS_AS(crnn_forward(g2, RowMatrix<double>(0, 256), p.crnn, cfg.crnn), PreconditionError);
}

TEST_CASE("frames after t+3 do not influence the output at t") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 6);
  const Index T = 20;
  const RowMatrix<double> x = random_frames(T, 256, 7);
  Graph<double> g0(false);
  const auto base = crnn_forward(g0, x, p.crnn, cfg.crnn).denoised.value().data();
  for (Index t : {0, 4, 10, 14}) {
    RowMatrix<double> y = x;
    y.row(t + 5).array() += 1.0;
    Graph<double> g(false);
    const auto out = crnn_forward(g, y, p.crnn, cfg.crnn).denoised.value().data();
    CHECK((out.head((t + 2) * 256) - base.head((t + 2) * 256)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.segment((t + 2) * 256, 256) - base.segment((t + 2) * 256, 256)).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("shared convolution equals per-window convolution") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 8);
  const RowMatrix<double> x = random_frames(11, 256, 9);
  Graph<double> a(false), b(false);
  const auto shared = crnn_forward(a, x, p.crnn, cfg.crnn, true);
  const auto windows = crnn_forward(b, x, p.crnn, cfg.crnn, false);
  CHECK((shared.denoised.value().data() - windows.denoised.value().data()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((shared.final.top_h().value().data() - windows.final.top_h().value().data()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward pass is deterministic") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 10);
  auto q = init_params<double>(cfg, 10);
  const RowMatrix<double> x = random_frames(9, 256, 11);
  Graph<double> a(false), b(false);
  CHECK(crnn_forward(a, x, p.crnn, cfg.crnn).denoised.value().data() ==
        crnn_forward(b, x, q.crnn, cfg.crnn).denoised.value().data());
}

TEST_CASE("lm_decode") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 12);
  Graph<double> g(false);
  const auto s1 = crnn_forward(g, random_frames(8, 256, 13), p.crnn, cfg.crnn).final;
  const auto s2 = crnn_forward(g, random_frames(8, 256, 14), p.crnn, cfg.crnn).final;
  const std::vector<int> t{1, 5, 0, 7};
  const auto l1 = lm_decode(s1, t, p.lm, cfg.lm);
  CHECK(l1.shape() == Shape{5, cfg.lm.classes()});
  const auto l2 = lm_decode(s2, t, p.lm, cfg.lm);
  CHECK((l1.value().data().head(cfg.lm.classes()) - l2.value().data().head(cfg.lm.classes())).cwiseAbs().maxCoeff() >
        0.0);
  CHECK(lm_decode(s1, std::vector<int>{}, p.lm, cfg.lm).shape() == Shape{1, cfg.lm.classes()});
  CHECK(lm_targets(t, cfg.lm) == std::vector<int>{1, 5, 0, 7, 8});

  CHECK_THROWS_AS(lm_decode(s1, std::vector<int>{1, 8}, p.lm, cfg.lm), PreconditionError);
  CHECK_THROWS_AS(lm_decode(s1, std::vector<int>(61, 1), p.lm, cfg.lm), PreconditionError);
  CHECK(ModelConfig::preset("paper").lm.vocab_size == 857);
}

TEST_CASE("greedy decoding limits") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 15);
  Graph<double> g(false);
  const auto s = crnn_forward(g, random_frames(6, 256, 16), p.crnn, cfg.crnn).final;

  p.lm.out_b.data()(cfg.lm.eos()) = 1e6;
  CHECK(lm_greedy_decode(s, p.lm, cfg.lm).empty());

  p.lm.out_b.data().setZero();
  p.lm.out_b.data()(3) = 1e6;
  const auto words = lm_greedy_decode(s, p.lm, cfg.lm, 500);
  CHECK(words.size() == 60u);
  for (int w : words) CHECK(w == 3);
  CHECK(lm_greedy_decode(s, p.lm, cfg.lm, 7).size() == 7u);
}

TEST_CASE("parameter cast round trip") {
  const ModelConfig cfg = ModelConfig::preset("tiny");
  auto p = init_params<double>(cfg, 17);
  auto q = p.cast<long double>().cast<double>();
  auto a = p.named();
  auto b = q.named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second->data() == b[i].second->data());
  }
}
