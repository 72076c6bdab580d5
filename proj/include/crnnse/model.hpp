// include/crnnse/model.hpp

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

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crnnse/config.hpp"
#include "crnnse/ops.hpp"

namespace crnnse {

// ---------------------------------------------------------------------------
// Configuration

/// One convolution layer: filters, kernel (frequency, time), stride, dilation.
struct ConvSpec {
  Index filters = 16;
  Index kernel_h = 7;
  Index kernel_w = 5;
  Index stride_h = 3;
  Index stride_w = 1;
  Index dilation_h = 2;
  Index dilation_w = 1;
};

/// Denoiser layout. The conv stack sees a 1-channel image of feature_dim
/// frequency rows by context_frames time columns.
struct CrnnConfig {
  Index feature_dim = 256;
  Index context_frames = 8;
  std::vector<ConvSpec> conv;
  Index lstm_layers = 2;
  Index hidden = 64;
  Index out_dim = 256;
  // Activations are fixed; the names are echoed into configs and checkpoints.
  std::string conv_activation = "relu";
  std::string output_activation = "softplus";

  /// Frames before t in the window; the window covers [t - before, t + width - before - 1].
  Index context_before() const { return context_frames / 2; }

  /// [C, H, W] after each conv layer for a single context window.
  std::vector<std::array<Index, 3>> conv_shapes() const;
  /// Length of the flattened conv-stack output for one window.
  Index conv_output_size() const;
  void validate() const;
};

/// Decoder layout. Decoder hidden size equals the denoiser's hidden size.
struct LmConfig {
  Index vocab_size = 64;
  Index embed_dim = 32;
  Index max_len = 60;

  Index eos() const { return vocab_size; }
  Index bos() const { return vocab_size + 1; }
  /// Output classes: every word plus end-of-sentence.
  Index classes() const { return vocab_size + 1; }
  /// Embedding rows: words, end-of-sentence, begin-of-sentence.
  Index embed_rows() const { return vocab_size + 2; }
};

struct ModelConfig {
  CrnnConfig crnn;
  LmConfig lm;

  /// "paper": full-scale layer sizes; "desk": laptop scale; "tiny": gradient checks.
  static ModelConfig preset(const std::string& name);
  static ModelConfig from_kv(const KeyValueConfig& kv, const std::string& base_preset = "desk");
  KeyValueConfig to_kv() const;
  void validate() const;
};

/// Every key ModelConfig::from_kv understands.
std::set<std::string> model_config_keys();

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
struct ConvLayerParams {
  Tensor<Scalar> kernels;  // [C_out x C_in x kH x kW]
  Tensor<Scalar> bias;     // [C_out]
};

template <typename Scalar>
struct LstmLayerParams {
  Tensor<Scalar> w_ih;  // [4n x n_in]
  Tensor<Scalar> w_hh;  // [4n x n]
  Tensor<Scalar> bias;  // [4n]
};

template <typename Scalar>
using NamedTensors = std::vector<std::pair<std::string, Tensor<Scalar>*>>;

template <typename Scalar>
struct CrnnParams {
  std::vector<ConvLayerParams<Scalar>> conv;
  std::vector<LstmLayerParams<Scalar>> lstm;
  Tensor<Scalar> out_w;  // [out_dim x hidden]
  Tensor<Scalar> out_b;  // [out_dim]

  NamedTensors<Scalar> named() {
    NamedTensors<Scalar> out;
    for (std::size_t i = 0; i < conv.size(); ++i) {
      out.emplace_back("crnn.conv" + std::to_string(i) + ".kernels", &conv[i].kernels);
      out.emplace_back("crnn.conv" + std::to_string(i) + ".bias", &conv[i].bias);
    }
    for (std::size_t i = 0; i < lstm.size(); ++i) {
      out.emplace_back("crnn.lstm" + std::to_string(i) + ".w_ih", &lstm[i].w_ih);
      out.emplace_back("crnn.lstm" + std::to_string(i) + ".w_hh", &lstm[i].w_hh);
      out.emplace_back("crnn.lstm" + std::to_string(i) + ".bias", &lstm[i].bias);
    }
    out.emplace_back("crnn.out.w", &out_w);
    out.emplace_back("crnn.out.b", &out_b);
    return out;
  }
};

template <typename Scalar>
struct LmDecoderParams {
  Tensor<Scalar> embedding;  // [embed_rows x embed_dim]
  Tensor<Scalar> bridge_w;   // [hidden x hidden]
  Tensor<Scalar> bridge_b;   // [hidden]
  LstmLayerParams<Scalar> cell;
  Tensor<Scalar> out_w;  // [classes x hidden]
  Tensor<Scalar> out_b;  // [classes]

  NamedTensors<Scalar> named() {
    return {{"lm.embedding", &embedding}, {"lm.bridge.w", &bridge_w}, {"lm.bridge.b", &bridge_b},
            {"lm.cell.w_ih", &cell.w_ih}, {"lm.cell.w_hh", &cell.w_hh}, {"lm.cell.bias", &cell.bias},
            {"lm.out.w", &out_w},         {"lm.out.b", &out_b}};
  }
};

template <typename Scalar>
struct ModelParams {
  CrnnParams<Scalar> crnn;
  LmDecoderParams<Scalar> lm;

  NamedTensors<Scalar> named() {
    auto out = crnn.named();
    for (auto& p : lm.named()) out.push_back(p);
    return out;
  }

  std::vector<Tensor<Scalar>*> crnn_tensors() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& [name, t] : crnn.named()) out.push_back(t);
    return out;
  }

  std::vector<Tensor<Scalar>*> lm_tensors() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& [name, t] : lm.named()) out.push_back(t);
    return out;
  }

  std::vector<Tensor<Scalar>*> all_tensors() {
    auto out = crnn_tensors();
    for (auto* t : lm_tensors()) out.push_back(t);
    return out;
  }

  template <typename Other>
  ModelParams<Other> cast() const;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<Scalar> t(std::move(shape), true);
  for (Index i = 0; i < t.size(); ++i) t.data()(i) = Scalar(u(rng));
  return t;
}

template <typename Scalar>
LstmLayerParams<Scalar> init_lstm(Index n_in, Index n, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(n));
  LstmLayerParams<Scalar> p;
  p.w_ih = uniform_tensor<Scalar>({4 * n, n_in}, bound, rng);
  p.w_hh = uniform_tensor<Scalar>({4 * n, n}, bound, rng);
  p.bias = Tensor<Scalar>({4 * n}, true);
  p.bias.data().segment(n, n).setOnes();  // forget gate starts open
  return p;
}

template <typename From, typename To>
Tensor<To> cast_tensor(const Tensor<From>& t) {
  return t.template cast<To>();
}

}  // namespace detail

/// Deterministic initialization: uniform(+-1/sqrt(fan_in)) weights, zero
/// biases except LSTM forget gates (1).
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams<Scalar> p;
  const auto& c = cfg.crnn;
  Index cin = 1;
  for (const ConvSpec& s : c.conv) {
    const Index fan_in = cin * s.kernel_h * s.kernel_w;
    ConvLayerParams<Scalar> layer;
    layer.kernels = detail::uniform_tensor<Scalar>({s.filters, cin, s.kernel_h, s.kernel_w},
                                                   1.0 / std::sqrt(double(fan_in)), rng);
    layer.bias = Tensor<Scalar>({s.filters}, true);
    p.crnn.conv.push_back(std::move(layer));
    cin = s.filters;
  }
  Index n_in = c.conv_output_size();
  for (Index l = 0; l < c.lstm_layers; ++l) {
    p.crnn.lstm.push_back(detail::init_lstm<Scalar>(n_in, c.hidden, rng));
    n_in = c.hidden;
  }
  p.crnn.out_w = detail::uniform_tensor<Scalar>({c.out_dim, c.hidden}, 1.0 / std::sqrt(double(c.hidden)), rng);
  p.crnn.out_b = Tensor<Scalar>({c.out_dim}, true);

  const auto& lm = cfg.lm;
  p.lm.embedding = detail::uniform_tensor<Scalar>({lm.embed_rows(), lm.embed_dim}, 1.0, rng);
  p.lm.bridge_w = detail::uniform_tensor<Scalar>({c.hidden, c.hidden}, 1.0 / std::sqrt(double(c.hidden)), rng);
  p.lm.bridge_b = Tensor<Scalar>({c.hidden}, true);
  p.lm.cell = detail::init_lstm<Scalar>(lm.embed_dim, c.hidden, rng);
  p.lm.out_w = detail::uniform_tensor<Scalar>({lm.classes(), c.hidden}, 1.0 / std::sqrt(double(c.hidden)), rng);
  p.lm.out_b = Tensor<Scalar>({lm.classes()}, true);
  return p;
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
  ModelParams<Other> out;
  for (const auto& l : crnn.conv) {
    out.crnn.conv.push_back({detail::cast_tensor<Scalar, Other>(l.kernels), detail::cast_tensor<Scalar, Other>(l.bias)});
  }
  for (const auto& l : crnn.lstm) {
    out.crnn.lstm.push_back({detail::cast_tensor<Scalar, Other>(l.w_ih), detail::cast_tensor<Scalar, Other>(l.w_hh),
                             detail::cast_tensor<Scalar, Other>(l.bias)});
  }
  out.crnn.out_w = detail::cast_tensor<Scalar, Other>(crnn.out_w);
  out.crnn.out_b = detail::cast_tensor<Scalar, Other>(crnn.out_b);
  out.lm.embedding = detail::cast_tensor<Scalar, Other>(lm.embedding);
  out.lm.bridge_w = detail::cast_tensor<Scalar, Other>(lm.bridge_w);
  out.lm.bridge_b = detail::cast_tensor<Scalar, Other>(lm.bridge_b);
  out.lm.cell = {detail::cast_tensor<Scalar, Other>(lm.cell.w_ih), detail::cast_tensor<Scalar, Other>(lm.cell.w_hh),
                 detail::cast_tensor<Scalar, Other>(lm.cell.bias)};
  out.lm.out_w = detail::cast_tensor<Scalar, Other>(lm.out_w);
  out.lm.out_b = detail::cast_tensor<Scalar, Other>(lm.out_b);
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes

/// Per-layer LSTM state; back() is the top layer.
template <typename Scalar>
struct HiddenState {
  std::vector<LstmState<Scalar>> layers;

  const Var<Scalar>& top_h() const { return layers.back().h; }
};

template <typename Scalar>
struct CrnnOutput {
  Var<Scalar> denoised;  // [T x out_dim]
  HiddenState<Scalar> final;
};

/// feature_dim x width matrix whose column j is frame t - before + j, with
/// frames outside [0, T) replaced by zeros.
template <typename Scalar>
RowMatrix<Scalar> context_window(const RowMatrix<Scalar>& frames, Index t, Index width, Index before) {
  const Index T = frames.rows();
  if (t < 0 || t >= T) {
    throw PreconditionError("context_window: frame " + std::to_string(t) + " outside [0, " + std::to_string(T) + ")");
  }
  RowMatrix<Scalar> w = RowMatrix<Scalar>::Zero(frames.cols(), width);
  for (Index j = 0; j < width; ++j) {
    const Index src = t - before + j;
    if (src >= 0 && src < T) w.col(j) = frames.row(src).transpose();
  }
  return w;
}

template <typename Scalar>
RowMatrix<Scalar> context_window(const RowMatrix<Scalar>& frames, Index t, const CrnnConfig& cfg) {
  return context_window(frames, t, cfg.context_frames, cfg.context_before());
}

namespace detail {

/// Conv -> ReLU for every layer; returns the [C x H x W] map.
template <typename Scalar>
Var<Scalar> conv_layers(const Var<Scalar>& image, CrnnParams<Scalar>& params, const CrnnConfig& cfg) {
  Graph<Scalar>& g = image.graph();
  if (params.conv.size() != cfg.conv.size()) throw DimensionError("conv stack: parameter/config layer count mismatch");
  Var<Scalar> x = image;
  for (std::size_t i = 0; i < cfg.conv.size(); ++i) {
    const ConvSpec& s = cfg.conv[i];
    x = relu(conv2d(x, g.param(params.conv[i].kernels), g.param(params.conv[i].bias), Stride2{s.stride_h, s.stride_w},
                    Dilation2{s.dilation_h, s.dilation_w}));
  }
  return x;
}

template <typename Scalar>
Tensor<Scalar> image_tensor(const RowMatrix<Scalar>& image_rows) {
  Tensor<Scalar> t({1, image_rows.rows(), image_rows.cols()});
  Eigen::Map<RowMatrix<Scalar>>(t.data().data(), image_rows.rows(), image_rows.cols()) = image_rows;
  return t;
}

}  // namespace detail

/// Three-layer conv stack over one context window ([1 x feature_dim x width]),
/// flattened in (channel, frequency, time) order.
template <typename Scalar>
Var<Scalar> conv_stack_forward(const Var<Scalar>& window, CrnnParams<Scalar>& params, const CrnnConfig& cfg) {
  if (window.shape() != Shape{1, cfg.feature_dim, cfg.context_frames}) {
    throw DimensionError("conv_stack_forward: window shape " + shape_string(window.shape()) + " does not match [1x" +
                         std::to_string(cfg.feature_dim) + "x" + std::to_string(cfg.context_frames) + "]");
  }
  Var<Scalar> x = detail::conv_layers(window, params, cfg);
  return reshape(x, {x.size()});
}

template <typename Scalar>
LstmWeights<Scalar> bind_lstm(Graph<Scalar>& g, LstmLayerParams<Scalar>& p) {
  return {g.param(p.w_ih), g.param(p.w_hh), g.param(p.bias)};
}

/// Conv features for every frame, one row per frame ([T x conv_output_size]).
///
/// When every conv layer has unit time stride, the windows of neighbouring
/// frames share their conv outputs, so the stack runs once over the
/// zero-padded spectrogram and each frame's features are read from a slice of
/// consecutive columns. Otherwise each window is convolved on its own.
template <typename Scalar>
Var<Scalar> frame_features(Graph<Scalar>& g, const RowMatrix<Scalar>& noisy, CrnnParams<Scalar>& params,
                           const CrnnConfig& cfg, bool shared_conv = true) {
  const Index T = noisy.rows();
  bool unit_time_stride = true;
  for (const auto& s : cfg.conv) unit_time_stride = unit_time_stride && s.stride_w == 1;
  if (shared_conv && unit_time_stride) {
    const Index width = T + cfg.context_frames - 1;
    RowMatrix<Scalar> image = RowMatrix<Scalar>::Zero(cfg.feature_dim, width);
    for (Index t = 0; t < T; ++t) image.col(t + cfg.context_before()) = noisy.row(t).transpose();
    Var<Scalar> maps = detail::conv_layers(g.constant(detail::image_tensor(image)), params, cfg);
    return unfold_columns(maps, cfg.conv_shapes().back()[2]);
  }
  std::vector<Var<Scalar>> rows;
  rows.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    rows.push_back(conv_stack_forward(g.constant(detail::image_tensor(context_window(noisy, t, cfg))), params, cfg));
  }
  return stack_rows(rows);
}

/// Denoises a [T x feature_dim] magnitude sequence: per frame, conv features
/// of its context window feed a stacked LSTM whose top state is projected to
/// a non-negative frame. Returns all frames and the final recurrent state.
template <typename Scalar>
CrnnOutput<Scalar> crnn_forward(Graph<Scalar>& g, const RowMatrix<Scalar>& noisy, CrnnParams<Scalar>& params,
                                const CrnnConfig& cfg, bool shared_conv = true) {
  const Index T = noisy.rows();
  if (T < 1) throw PreconditionError("crnn_forward: need at least one frame");
  if (noisy.cols() != cfg.feature_dim) {
    throw DimensionError("crnn_forward: frames have " + std::to_string(noisy.cols()) + " features, expected " +
                         std::to_string(cfg.feature_dim));
  }
  if (static_cast<Index>(params.lstm.size()) != cfg.lstm_layers) {
    throw DimensionError("crnn_forward: parameter/config LSTM layer count mismatch");
  }
  const Var<Scalar> features = frame_features(g, noisy, params, cfg, shared_conv);

  std::vector<LstmWeights<Scalar>> weights;
  HiddenState<Scalar> state;
  const Var<Scalar> zero = g.constant(Tensor<Scalar>({cfg.hidden}));
  for (auto& layer : params.lstm) {
    weights.push_back(bind_lstm(g, layer));
    state.layers.push_back({zero, zero});
  }

  std::vector<Var<Scalar>> top;
  top.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    Var<Scalar> x = row(features, t);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      state.layers[l] = lstm_step(x, state.layers[l].h, state.layers[l].c, weights[l]);
      x = state.layers[l].h;
    }
    top.push_back(x);
  }
  Var<Scalar> projected = linear(stack_rows(top), g.param(params.out_w), g.param(params.out_b));
  return {softplus(projected), std::move(state)};
}

namespace detail {

template <typename Scalar>
void check_transcript(std::span<const int> transcript, const LmConfig& cfg) {
  if (static_cast<Index>(transcript.size()) > cfg.max_len) {
    throw PreconditionError("lm_decode: transcript of " + std::to_string(transcript.size()) + " words exceeds " +
                            std::to_string(cfg.max_len));
  }
  for (int id : transcript) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw PreconditionError("lm_decode: word id " + std::to_string(id) + " outside [0, " +
                              std::to_string(cfg.vocab_size) + ")");
    }
  }
}

template <typename Scalar>
LstmState<Scalar> decoder_initial_state(const HiddenState<Scalar>& final, LmDecoderParams<Scalar>& params) {
  Graph<Scalar>& g = final.top_h().graph();
  Var<Scalar> h0 = tanh(linear(final.top_h(), g.param(params.bridge_w), g.param(params.bridge_b)));
  return {h0, g.constant(Tensor<Scalar>(h0.shape()))};
}

}  // namespace detail

/// Teacher-forced decoder pass. The decoder starts from a map of the
/// denoiser's final top-layer hidden state, reads BOS followed by the
/// transcript, and returns (len + 1) x classes logits whose targets are the
/// transcript followed by EOS.
template <typename Scalar>
Var<Scalar> lm_decode(const HiddenState<Scalar>& final, std::span<const int> transcript, LmDecoderParams<Scalar>& params,
                      const LmConfig& cfg) {
  detail::check_transcript<Scalar>(transcript, cfg);
  Graph<Scalar>& g = final.top_h().graph();
  LstmState<Scalar> s = detail::decoder_initial_state(final, params);
  const LstmWeights<Scalar> cell = bind_lstm(g, params.cell);
  const Var<Scalar> embedding = g.param(params.embedding);
  std::vector<Var<Scalar>> outputs;
  outputs.reserve(transcript.size() + 1);
  Index token = cfg.bos();
  for (std::size_t k = 0; k <= transcript.size(); ++k) {
    s = lstm_step(row(embedding, token), s.h, s.c, cell);
    outputs.push_back(s.h);
    if (k < transcript.size()) token = transcript[k];
  }
  return linear(stack_rows(outputs), g.param(params.out_w), g.param(params.out_b));
}

/// Decoder targets for a transcript: the words followed by EOS.
inline std::vector<int> lm_targets(std::span<const int> transcript, const LmConfig& cfg) {
  std::vector<int> out(transcript.begin(), transcript.end());
  out.push_back(static_cast<int>(cfg.eos()));
  return out;
}

/// Greedy argmax generation from BOS until EOS or max_len words.
template <typename Scalar>
std::vector<int> lm_greedy_decode(const HiddenState<Scalar>& final, LmDecoderParams<Scalar>& params, const LmConfig& cfg,
                                  Index max_len = 60) {
  max_len = std::min(max_len, cfg.max_len);
  Graph<Scalar>& g = final.top_h().graph();
  LstmState<Scalar> s = detail::decoder_initial_state(final, params);
  const LstmWeights<Scalar> cell = bind_lstm(g, params.cell);
  const Var<Scalar> embedding = g.param(params.embedding);
  const Var<Scalar> out_w = g.param(params.out_w), out_b = g.param(params.out_b);
  std::vector<int> words;
  Index token = cfg.bos();
  while (static_cast<Index>(words.size()) < max_len) {
    s = lstm_step(row(embedding, token), s.h, s.c, cell);
    const auto& logits = linear(s.h, out_w, out_b).value().data();
    Index best = 0;
    logits.maxCoeff(&best);
    if (best == cfg.eos()) break;
    words.push_back(static_cast<int>(best));
    token = best;
  }
  return words;
}

/// Copies a [T x D] double matrix into the model's scalar type.
template <typename Scalar>
RowMatrix<Scalar> to_frames(const Eigen::MatrixXd& m) {
  return m.cast<Scalar>();
}

}  // namespace crnnse
