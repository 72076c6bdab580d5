// include/crnnse/ops.hpp

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
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "crnnse/graph.hpp"

namespace crnnse {

struct Stride2 {
  Index h = 1;
  Index w = 1;
};

struct Dilation2 {
  Index h = 1;
  Index w = 1;
};

/// Output length of an unpadded strided, dilated convolution along one axis.
/// Returns 0 when the dilated kernel does not fit.
inline Index conv_output_extent(Index input, Index kernel, Index stride, Index dilation) {
  const Index effective = (kernel - 1) * dilation + 1;
  if (effective > input) return 0;
  return (input - effective) / stride + 1;
}

namespace detail {

template <typename Scalar>
Var<Scalar> unary(const Var<Scalar>& x, Tensor<Scalar> out,
                  typename Graph<Scalar>::BackwardFn backward) {
  return x.graph().record(std::move(out), {x.id()}, std::move(backward));
}

template <typename Scalar>
void require_same_graph(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (&a.graph() != &b.graph()) throw PreconditionError(std::string(op) + ": operands on different graphs");
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  require_same_graph(a, b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& gy = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy;
    if (g.needs_grad(ib)) g.grad(ib) += gy;
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<Scalar> out(a.shape(), a.value().data() - b.value().data());
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& gy = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy;
    if (g.needs_grad(ib)) g.grad(ib) -= gy;
  });
}

/// Hadamard product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<Scalar> out(a.shape(), a.value().data().cwiseProduct(b.value().data()));
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {ia, ib}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& gy = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gy.cwiseProduct(g.value(ib).data());
    if (g.needs_grad(ib)) g.grad(ib) += gy.cwiseProduct(g.value(ia).data());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, std::type_identity_t<Scalar> factor) {
  Tensor<Scalar> out(x.shape(), x.value().data() * factor);
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix, factor](Graph<Scalar>& g, int self) {
    g.grad(ix) += g.grad(self) * factor;
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  const int ix = x.id();
  return detail::unary(x, Tensor<Scalar>::scalar(x.value().data().sum()),
                       [ix](Graph<Scalar>& g, int self) {
                         g.grad(ix).array() += g.grad(self)(0);
                       });
}

// ---------------------------------------------------------------------------
// Activations

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().cwiseMax(Scalar(0)));
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix](Graph<Scalar>& g, int self) {
    const auto& in = g.value(ix).data();
    g.grad(ix) += (in.array() > Scalar(0)).select(g.grad(self).array(), Scalar(0)).matrix();
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().unaryExpr([](Scalar v) { return detail::sigmoid(v); }));
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix](Graph<Scalar>& g, int self) {
    const auto y = g.value(self).data().array();
    g.grad(ix).array() += g.grad(self).array() * y * (Scalar(1) - y);
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().array().tanh().matrix());
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix](Graph<Scalar>& g, int self) {
    const auto y = g.value(self).data().array();
    g.grad(ix).array() += g.grad(self).array() * (Scalar(1) - y * y);
  });
}

/// log(1 + e^x); strictly positive output.
template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().unaryExpr([](Scalar v) { return detail::softplus(v); }));
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix](Graph<Scalar>& g, int self) {
    const auto& in = g.value(ix).data();
    g.grad(ix).array() +=
        g.grad(self).array() * in.unaryExpr([](Scalar v) { return detail::sigmoid(v); }).array();
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  const int ix = x.id();
  return detail::unary(x, Tensor<Scalar>(std::move(shape), x.value().data()),
                       [ix](Graph<Scalar>& g, int self) { g.grad(ix) += g.grad(self); });
}

/// Contiguous run of `length` values starting at `offset`, as a rank-1 tensor.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index offset, Index length) {
  if (offset < 0 || length <= 0 || offset + length > x.size()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const int ix = x.id();
  return detail::unary(x, Tensor<Scalar>({length}, x.value().data().segment(offset, length)),
                       [ix, offset, length](Graph<Scalar>& g, int self) {
                         g.grad(ix).segment(offset, length) += g.grad(self);
                       });
}

/// Row `r` of a matrix-shaped tensor (first axis), flattened.
template <typename Scalar>
Var<Scalar> row(const Var<Scalar>& x, Index r) {
  if (x.value().rank() < 2) throw DimensionError("row: expected rank >= 2, got " + shape_string(x.shape()));
  if (r < 0 || r >= x.shape()[0]) {
    throw DimensionError("row: index " + std::to_string(r) + " out of range for axis 0 of " +
                         shape_string(x.shape()));
  }
  const Index width = x.size() / x.shape()[0];
  return slice(x, r * width, width);
}

/// Stacks equally sized rank-1 tensors into a [count x width] matrix.
template <typename Scalar>
Var<Scalar> stack_rows(std::span<const Var<Scalar>> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const Index width = rows.front().size();
  Tensor<Scalar> out({static_cast<Index>(rows.size()), width});
  std::vector<int> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    detail::require_same_graph(rows.front(), rows[r], "stack_rows");
    if (rows[r].size() != width) {
      throw DimensionError("stack_rows: row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " values, expected " + std::to_string(width));
    }
    out.data().segment(static_cast<Index>(r) * width, width) = rows[r].value().data();
    ids.push_back(rows[r].id());
  }
  auto inputs = ids;
  return rows.front().graph().record(std::move(out), std::move(inputs),
                                     [ids = std::move(ids), width](Graph<Scalar>& g, int self) {
                                       const auto& gy = g.grad(self);
                                       for (std::size_t r = 0; r < ids.size(); ++r) {
                                         if (g.needs_grad(ids[r])) {
                                           g.grad(ids[r]) += gy.segment(static_cast<Index>(r) * width, width);
                                         }
                                       }
                                     });
}

template <typename Scalar>
Var<Scalar> stack_rows(const std::vector<Var<Scalar>>& rows) {
  return stack_rows(std::span<const Var<Scalar>>(rows));
}

/// Sliding time windows over a [C x H x W] feature map: row t of the result is
/// x[:, :, t:t+width] flattened in (channel, height, width) order.
template <typename Scalar>
Var<Scalar> unfold_columns(const Var<Scalar>& x, Index width) {
  const auto& s = x.shape();
  if (s.size() != 3) throw DimensionError("unfold_columns: expected [C x H x W], got " + shape_string(s));
  const Index C = s[0], H = s[1], W = s[2];
  if (width <= 0 || width > W) throw DimensionError("unfold_columns: width exceeds axis 2 of " + shape_string(s));
  const Index T = W - width + 1;
  const Index D = C * H * width;
  Tensor<Scalar> out({T, D});
  const auto& in = x.value().data();
  auto& o = out.data();
  for (Index t = 0; t < T; ++t)
    for (Index ch = 0; ch < C * H; ++ch)
      for (Index j = 0; j < width; ++j) o(t * D + ch * width + j) = in(ch * W + t + j);
  const int ix = x.id();
  return detail::unary(x, std::move(out), [ix, C, H, W, T, D, width](Graph<Scalar>& g, int self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(ix);
    for (Index t = 0; t < T; ++t)
      for (Index ch = 0; ch < C * H; ++ch)
        for (Index j = 0; j < width; ++j) gx(ch * W + t + j) += gy(t * D + ch * width + j);
  });
}

// ---------------------------------------------------------------------------
// Dense layers

/// Affine map y = W x + b for x of shape [n] or row-wise for [T x n].
/// W has shape [m x n] and b has shape [m].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  detail::require_same_graph(x, weight, "linear");
  detail::require_same_graph(x, bias, "linear");
  const auto& ws = weight.shape();
  if (ws.size() != 2) throw DimensionError("linear: weight must be [m x n], got " + shape_string(ws));
  const Index m = ws[0], n = ws[1];
  if (bias.shape() != Shape{m}) {
    throw DimensionError("linear: bias shape " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(m) + " outputs");
  }
  const bool single = x.value().rank() == 1;
  const Index rows = single ? 1 : x.shape()[0];
  if (x.size() != rows * n || (!single && x.value().rank() != 2)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not have " + std::to_string(n) +
                         " features on its last axis");
  }
  using M = RowMatrix<Scalar>;
  Eigen::Map<const M> X(x.value().data().data(), rows, n);
  Eigen::Map<const M> Wm(weight.value().data().data(), m, n);
  Tensor<Scalar> out(single ? Shape{m} : Shape{rows, m});
  Eigen::Map<M> Y(out.data().data(), rows, m);
  Y.noalias() = X * Wm.transpose();
  Y.rowwise() += bias.value().data().transpose();
  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.graph().record(std::move(out), {ix, iw, ib}, [=](Graph<Scalar>& g, int self) {
    Eigen::Map<const M> gy(g.grad(self).data(), rows, m);
    if (g.needs_grad(iw)) {
      Eigen::Map<const M> Xv(g.value(ix).data().data(), rows, n);
      Eigen::Map<M>(g.grad(iw).data(), m, n).noalias() += gy.transpose() * Xv;
    }
    if (g.needs_grad(ib)) g.grad(ib) += gy.colwise().sum().transpose();
    if (g.needs_grad(ix)) {
      Eigen::Map<const M> Wv(g.value(iw).data().data(), m, n);
      Eigen::Map<M>(g.grad(ix).data(), rows, n).noalias() += gy * Wv;
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution

/// Unpadded 2-D convolution of a [C_in x H x W] input with [C_out x C_in x kH x kW]
/// kernels, per-channel bias, and independent stride and dilation per axis.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& kernels, const Var<Scalar>& bias,
                   Stride2 stride, Dilation2 dilation) {
  detail::require_same_graph(input, kernels, "conv2d");
  detail::require_same_graph(input, bias, "conv2d");
  const auto& is = input.shape();
  const auto& ks = kernels.shape();
  if (is.size() != 3) throw DimensionError("conv2d: input must be [C_in x H x W], got " + shape_string(is));
  if (ks.size() != 4) throw DimensionError("conv2d: kernels must be [C_out x C_in x kH x kW], got " + shape_string(ks));
  if (stride.h <= 0 || stride.w <= 0 || dilation.h <= 0 || dilation.w <= 0) {
    throw PreconditionError("conv2d: stride and dilation must be positive");
  }
  const Index Cin = is[0], H = is[1], W = is[2];
  const Index Cout = ks[0], kH = ks[2], kW = ks[3];
  if (ks[1] != Cin) {
    throw DimensionError("conv2d: channel axis mismatch, kernels expect " + std::to_string(ks[1]) +
                         " input channels but input has " + std::to_string(Cin));
  }
  if (bias.shape() != Shape{Cout}) {
    throw DimensionError("conv2d: bias shape " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(Cout) + " output channels");
  }
  const Index Ho = conv_output_extent(H, kH, stride.h, dilation.h);
  const Index Wo = conv_output_extent(W, kW, stride.w, dilation.w);
  if (Ho == 0) {
    throw DimensionError("conv2d: height axis too small, dilated kernel extent " +
                         std::to_string((kH - 1) * dilation.h + 1) + " exceeds input height " + std::to_string(H));
  }
  if (Wo == 0) {
    throw DimensionError("conv2d: width axis too small, dilated kernel extent " +
                         std::to_string((kW - 1) * dilation.w + 1) + " exceeds input width " + std::to_string(W));
  }

  using M = RowMatrix<Scalar>;
  const Index K = Cin * kH * kW;
  const Index P = Ho * Wo;
  M cols(K, P);
  const auto& x = input.value().data();
  for (Index c = 0; c < Cin; ++c)
    for (Index i = 0; i < kH; ++i)
      for (Index j = 0; j < kW; ++j) {
        const Index r = (c * kH + i) * kW + j;
        for (Index oh = 0; oh < Ho; ++oh) {
          const Index base = c * H * W + (oh * stride.h + i * dilation.h) * W + j * dilation.w;
          for (Index ow = 0; ow < Wo; ++ow) cols(r, oh * Wo + ow) = x(base + ow * stride.w);
        }
      }

  Tensor<Scalar> out({Cout, Ho, Wo});
  Eigen::Map<M> Y(out.data().data(), Cout, P);
  Eigen::Map<const M> Kmat(kernels.value().data().data(), Cout, K);
  Y.noalias() = Kmat * cols;
  Y.colwise() += bias.value().data();

  const int ix = input.id(), ik = kernels.id(), ib = bias.id();
  return input.graph().record(
      std::move(out), {ix, ik, ib},
      [=, cols = std::move(cols)](Graph<Scalar>& g, int self) {
        Eigen::Map<const M> gy(g.grad(self).data(), Cout, P);
        if (g.needs_grad(ik)) Eigen::Map<M>(g.grad(ik).data(), Cout, K).noalias() += gy * cols.transpose();
        if (g.needs_grad(ib)) g.grad(ib) += gy.rowwise().sum();
        if (g.needs_grad(ix)) {
          Eigen::Map<const M> Kv(g.value(ik).data().data(), Cout, K);
          const M gcols = Kv.transpose() * gy;
          auto& gx = g.grad(ix);
          for (Index c = 0; c < Cin; ++c)
            for (Index i = 0; i < kH; ++i)
              for (Index j = 0; j < kW; ++j) {
                const Index r = (c * kH + i) * kW + j;
                for (Index oh = 0; oh < Ho; ++oh) {
                  const Index base = c * H * W + (oh * stride.h + i * dilation.h) * W + j * dilation.w;
                  for (Index ow = 0; ow < Wo; ++ow) gx(base + ow * stride.w) += gcols(r, oh * Wo + ow);
                }
              }
        }
      });
}

// ---------------------------------------------------------------------------
// Recurrent cell

template <typename Scalar>
struct LstmState {
  Var<Scalar> h;
  Var<Scalar> c;
};

/// Graph handles for one LSTM layer. Gate blocks are stacked in the order
/// input, forget, candidate, output along the first axis of w_ih, w_hh, bias.
template <typename Scalar>
struct LstmWeights {
  Var<Scalar> w_ih;  // [4n x n_in]
  Var<Scalar> w_hh;  // [4n x n]
  Var<Scalar> bias;  // [4n]
};

/// One LSTM time step:
///   i = sigma(z_i), f = sigma(z_f), g = tanh(z_g), o = sigma(z_o)
///   c' = f * c + i * g,   h' = o * tanh(c')
/// with z = W_ih x + W_hh h + b.
template <typename Scalar>
LstmState<Scalar> lstm_step(const Var<Scalar>& x, const Var<Scalar>& h, const Var<Scalar>& c,
                            const LstmWeights<Scalar>& w) {
  const auto& wih = w.w_ih.shape();
  const auto& whh = w.w_hh.shape();
  if (wih.size() != 2 || wih[0] % 4 != 0) {
    throw DimensionError("lstm_step: w_ih must be [4n x n_in], got " + shape_string(wih));
  }
  const Index n = wih[0] / 4, nin = wih[1];
  if (whh != Shape{4 * n, n}) throw DimensionError("lstm_step: w_hh shape " + shape_string(whh) + " inconsistent with n=" + std::to_string(n));
  if (w.bias.shape() != Shape{4 * n}) throw DimensionError("lstm_step: bias shape " + shape_string(w.bias.shape()));
  if (x.size() != nin) throw DimensionError("lstm_step: input has " + std::to_string(x.size()) + " values, expected " + std::to_string(nin));
  if (h.size() != n) throw DimensionError("lstm_step: hidden state has " + std::to_string(h.size()) + " values, expected " + std::to_string(n));
  if (c.size() != n) throw DimensionError("lstm_step: cell state has " + std::to_string(c.size()) + " values, expected " + std::to_string(n));

  using M = RowMatrix<Scalar>;
  using V = Vector<Scalar>;
  Eigen::Map<const M> Wih(w.w_ih.value().data().data(), 4 * n, nin);
  Eigen::Map<const M> Whh(w.w_hh.value().data().data(), 4 * n, n);
  V z = w.bias.value().data();
  z.noalias() += Wih * x.value().data();
  z.noalias() += Whh * h.value().data();

  // cache = [i, f, g, o, tanh(c')]
  V cache(5 * n);
  for (Index k = 0; k < n; ++k) {
    cache(k) = detail::sigmoid(z(k));
    cache(n + k) = detail::sigmoid(z(n + k));
    cache(2 * n + k) = std::tanh(z(2 * n + k));
    cache(3 * n + k) = detail::sigmoid(z(3 * n + k));
  }
  Tensor<Scalar> out({2 * n});
  const auto& cprev = c.value().data();
  for (Index k = 0; k < n; ++k) {
    const Scalar cn = cache(n + k) * cprev(k) + cache(k) * cache(2 * n + k);
    const Scalar tc = std::tanh(cn);
    cache(4 * n + k) = tc;
    out.data()(k) = cache(3 * n + k) * tc;
    out.data()(n + k) = cn;
  }

  const int ix = x.id(), ih = h.id(), ic = c.id();
  const int iw = w.w_ih.id(), iu = w.w_hh.id(), ib = w.bias.id();
  Var<Scalar> fused = x.graph().record(
      std::move(out), {ix, ih, ic, iw, iu, ib},
      [=, cache = std::move(cache)](Graph<Scalar>& g, int self) {
        const auto& gy = g.grad(self);
        const auto& cp = g.value(ic).data();
        V dz(4 * n);
        V dc_prev(n);
        for (Index k = 0; k < n; ++k) {
          const Scalar i = cache(k), f = cache(n + k), gg = cache(2 * n + k), o = cache(3 * n + k);
          const Scalar tc = cache(4 * n + k);
          const Scalar dh = gy(k);
          const Scalar dc = gy(n + k) + dh * o * (Scalar(1) - tc * tc);
          dz(k) = dc * gg * i * (Scalar(1) - i);
          dz(n + k) = dc * cp(k) * f * (Scalar(1) - f);
          dz(2 * n + k) = dc * i * (Scalar(1) - gg * gg);
          dz(3 * n + k) = dh * tc * o * (Scalar(1) - o);
          dc_prev(k) = dc * f;
        }
        if (g.needs_grad(ib)) g.grad(ib) += dz;
        if (g.needs_grad(iw)) {
          Eigen::Map<M>(g.grad(iw).data(), 4 * n, nin).noalias() += dz * g.value(ix).data().transpose();
        }
        if (g.needs_grad(iu)) {
          Eigen::Map<M>(g.grad(iu).data(), 4 * n, n).noalias() += dz * g.value(ih).data().transpose();
        }
        if (g.needs_grad(ix)) {
          Eigen::Map<const M> Wv(g.value(iw).data().data(), 4 * n, nin);
          g.grad(ix).noalias() += Wv.transpose() * dz;
        }
        if (g.needs_grad(ih)) {
          Eigen::Map<const M> Uv(g.value(iu).data().data(), 4 * n, n);
          g.grad(ih).noalias() += Uv.transpose() * dz;
        }
        if (g.needs_grad(ic)) g.grad(ic) += dc_prev;
      });
  return {slice(fused, 0, n), slice(fused, n, n)};
}

// ---------------------------------------------------------------------------
// Losses

/// Squared error summed within each frame and averaged over frames. The first
/// axis indexes frames; a rank-1 tensor is a single frame.
template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& pred, const Var<Scalar>& target) {
  detail::require_same_shape(pred, target, "mse_loss");
  const Index frames = pred.value().rank() == 1 ? 1 : pred.shape()[0];
  const Scalar value = (pred.value().data() - target.value().data()).squaredNorm() / Scalar(frames);
  const int ip = pred.id(), it = target.id();
  return pred.graph().record(Tensor<Scalar>::scalar(value), {ip, it},
                             [ip, it, frames](Graph<Scalar>& g, int self) {
                               const Scalar k = Scalar(2) * g.grad(self)(0) / Scalar(frames);
                               const Vector<Scalar> diff = g.value(ip).data() - g.value(it).data();
                               if (g.needs_grad(ip)) g.grad(ip) += k * diff;
                               if (g.needs_grad(it)) g.grad(it) -= k * diff;
                             });
}

/// Mean over positions of -log softmax(logits[t])[targets[t]].
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, std::span<const int> targets) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw DimensionError("cross_entropy: logits must be [T x V], got " + shape_string(s));
  const Index T = s[0], V = s[1];
  if (static_cast<Index>(targets.size()) != T) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(T) + " positions");
  }
  for (int id : targets) {
    if (id < 0 || id >= V) {
      throw PreconditionError("cross_entropy: token id " + std::to_string(id) + " outside [0, " +
                              std::to_string(V) + ")");
    }
  }
  using M = RowMatrix<Scalar>;
  Eigen::Map<const M> L(logits.value().data().data(), T, V);
  M probs(T, V);
  Scalar total = 0;
  for (Index t = 0; t < T; ++t) {
    const Scalar mx = L.row(t).maxCoeff();
    probs.row(t) = (L.row(t).array() - mx).exp().matrix();
    const Scalar z = probs.row(t).sum();
    probs.row(t) /= z;
    total += std::log(z) + mx - L(t, targets[static_cast<std::size_t>(t)]);
  }
  std::vector<int> tg(targets.begin(), targets.end());
  const int il = logits.id();
  return logits.graph().record(
      Tensor<Scalar>::scalar(total / Scalar(T)), {il},
      [il, T, V, tg = std::move(tg), probs = std::move(probs)](Graph<Scalar>& g, int self) {
        const Scalar k = g.grad(self)(0) / Scalar(T);
        Eigen::Map<M> gl(g.grad(il).data(), T, V);
        gl += k * probs;
        for (Index t = 0; t < T; ++t) gl(t, tg[static_cast<std::size_t>(t)]) -= k;
      });
}

}  // namespace crnnse
