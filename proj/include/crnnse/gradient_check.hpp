// include/crnnse/gradient_check.hpp

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
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "crnnse/graph.hpp"

namespace crnnse {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Builds a fresh graph, binds params, and returns the scalar loss.
template <typename Scalar>
using LossBuilder = std::function<Var<Scalar>(Graph<Scalar>&)>;

/// Compares reverse-mode gradients with central differences
/// (L(p+h) - L(p-h)) / 2h for every scalar of every parameter.
///
/// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
/// gradients that are zero up to rounding from reporting spurious failures.
template <typename Scalar>
GradientCheckResult gradient_check(const LossBuilder<Scalar>& loss_fn, const std::vector<Tensor<Scalar>*>& params,
                                   double h, double floor = 1e-6) {
  if (!(h > 0.0)) throw PreconditionError("gradient_check: step h must be positive");

  auto evaluate = [&]() {
    Graph<Scalar> g;
    const Scalar value = loss_fn(g).item();
    if (!std::isfinite(static_cast<double>(value))) throw NumericError("gradient_check: loss is not finite");
    return value;
  };

  for (auto* p : params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Graph<Scalar> g;
    Var<Scalar> loss = loss_fn(g);
    if (!std::isfinite(static_cast<double>(loss.item()))) throw NumericError("gradient_check: loss is not finite");
    g.backward(loss);
  }

  GradientCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi]->data();
    const Vector<Scalar> analytic = params[pi]->grad();
    for (Index k = 0; k < data.size(); ++k) {
      const Scalar saved = data(k);
      data(k) = saved + Scalar(h);
      const Scalar up = evaluate();
      data(k) = saved - Scalar(h);
      const Scalar down = evaluate();
      data(k) = saved;
      // Differences are formed in Scalar so extended-precision checks keep their digits.
      const double numeric = static_cast<double>((up - down) / (Scalar(2) * Scalar(h)));
      const double a = static_cast<double>(analytic(k));
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = pi;
        result.worst_index = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace crnnse
