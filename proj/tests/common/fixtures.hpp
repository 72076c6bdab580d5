// tests/common/fixtures.hpp

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

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "crnnse/gradient_check.hpp"
#include "crnnse/model.hpp"
#include "crnnse/training.hpp"

namespace crnnse::testing {

template <typename Scalar>
Tensor<Scalar> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(std::move(shape), true);
  for (Index i = 0; i < t.size(); ++i) t.data()(i) = Scalar(u(rng));
  return t;
}

/// Random tensor rescaled to unit norm or less.
template <typename Scalar>
Tensor<Scalar> unit_ball_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor<Scalar> t = random_tensor<Scalar>(std::move(shape), rng);
  const Scalar n = t.data().norm();
  if (n > Scalar(1)) t.data() /= n;
  return t;
}

/// Tiny model at a generic point for finite-difference checks: inputs in
/// [0, 0.1), biases uniform in +-0.1 (zero biases put ReLU inputs exactly on
/// the kink for zero-padded columns), targets near the model output so the
/// loss stays small next to the difference step.
template <typename Scalar>
struct TinyProblem {
  ModelConfig cfg = ModelConfig::preset("tiny");
  ModelParams<Scalar> params;
  RowMatrix<Scalar> noisy;
  RowMatrix<Scalar> clean;
  std::vector<int> transcript{1, 3, 2, 7};
  std::vector<std::pair<Tensor<Scalar>, Tensor<Scalar>>> final_state;

  explicit TinyProblem(Index frames = 12, std::uint64_t seed = 1) {
    params = init_params<Scalar>(cfg, seed);
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    noisy.resize(frames, cfg.crnn.feature_dim);
    for (Index i = 0; i < noisy.size(); ++i) noisy.data()[i] = Scalar(0.1 * u(rng));
    for (auto* t : params.all_tensors()) {
      if (t->rank() == 1) {
        for (Index i = 0; i < t->size(); ++i) t->data()(i) = Scalar(0.2 * u(rng) - 0.1);
      }
    }
    Graph<Scalar> g(false);
    const auto out = crnn_forward(g, noisy, params.crnn, cfg.crnn);
    for (const auto& l : out.final.layers) final_state.emplace_back(l.h.value(), l.c.value());
    clean = Eigen::Map<const RowMatrix<Scalar>>(out.denoised.value().data().data(), frames, cfg.crnn.out_dim);
    for (Index i = 0; i < clean.size(); ++i) {
      clean.data()[i] = std::max(Scalar(0), clean.data()[i] + Scalar(0.05 * (u(rng) - 0.5)));
    }
  }

  Var<Scalar> denoise_loss(Graph<Scalar>& g) {
    const auto out = crnn_forward(g, noisy, params.crnn, cfg.crnn);
    return loss_re(out.denoised, g.constant(Tensor<Scalar>::from_matrix(clean)));
  }

  /// Decoder loss with the denoiser's final state held fixed.
  Var<Scalar> decoder_loss(Graph<Scalar>& g) {
    HiddenState<Scalar> s;
    for (const auto& [h, c] : final_state) s.layers.push_back({g.constant(h), g.constant(c)});
    return loss_lm(lm_decode(s, transcript, params.lm, cfg.lm), transcript, cfg.lm);
  }

  Var<Scalar> combined_loss(Graph<Scalar>& g, double lambda1) {
    const auto out = crnn_forward(g, noisy, params.crnn, cfg.crnn);
    const Var<Scalar> logits = lm_decode(out.final, transcript, params.lm, cfg.lm);
    return loss_combined(out.denoised, g.constant(Tensor<Scalar>::from_matrix(clean)), &logits, transcript, cfg.lm,
                         lambda1, Phase::Joint);
  }
};

}  // namespace crnnse::testing
