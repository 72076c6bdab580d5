// include/crnnse/adam.hpp

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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crnnse/tensor.hpp"

namespace crnnse {

/// Moment estimates and hyperparameters of one Adam parameter group.
template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::vector<Vector<Scalar>> m;
  std::vector<Vector<Scalar>> v;
  double lr = 6.4710e-5;
  double beta1 = 0.8;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Bias-corrected Adam update with decoupled weight decay:
///   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
///
/// Every parameter must carry a gradient. Moment buffers are created on the
/// first call and must keep matching the parameters afterwards.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, AdamState<Scalar>& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) {
      throw PreconditionError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
  }
  if (state.m.empty() && state.v.empty()) {
    for (auto* p : params) {
      state.m.push_back(Vector<Scalar>::Zero(p->size()));
      state.v.push_back(Vector<Scalar>::Zero(p->size()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer holds " + std::to_string(state.m.size()) +
                         " moment slots for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size() || state.v[i].size() != params[i]->size()) {
      throw DimensionError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
  const Scalar corr1 = Scalar(1.0 - std::pow(state.beta1, t));
  const Scalar corr2 = Scalar(1.0 - std::pow(state.beta2, t));
  const Scalar lr = Scalar(state.lr);
  const Scalar eps = Scalar(state.epsilon);
  const Scalar decay = Scalar(state.lr * state.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data();
    const auto& g = params[i]->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    if (decay != Scalar(0)) p -= decay * p;
    p.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  }
}

template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>*>& params, AdamState<Scalar>& state) {
  adam_step(std::span<Tensor<Scalar>* const>(params), state);
}

/// Global L2 norm of all gradients; scales them down to `max_norm` when it is
/// exceeded. Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(std::span<Tensor<Scalar>* const> params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params) {
    if (p->has_grad()) sq += static_cast<double>(p->grad().squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const Scalar k = Scalar(max_norm / norm);
    for (auto* p : params) {
      if (p->has_grad()) p->grad() *= k;
    }
  }
  return norm;
}

}  // namespace crnnse
