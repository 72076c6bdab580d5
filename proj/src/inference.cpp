// src/inference.cpp

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

#include "crnnse/inference.hpp"

#include "crnnse/wav.hpp"

namespace crnnse {

RowMatrix<float> model_frames(const Eigen::MatrixXd& magnitudes) { return magnitudes.cast<float>(); }

ForwardResult run_model(const Eigen::MatrixXd& magnitudes, ModelParams<float>& params, const ModelConfig& cfg,
                        bool decode) {
  Graph<float> g(false);
  const CrnnOutput<float> out = crnn_forward(g, model_frames(magnitudes), params.crnn, cfg.crnn);
  ForwardResult r;
  r.magnitudes = out.denoised.value().matrix().cast<double>();
  if (decode) r.hypothesis = lm_greedy_decode(out.final, params.lm, cfg.lm, cfg.lm.max_len);
  return r;
}

Waveform resynthesize(const FeatureSequence& noisy_features, const Eigen::MatrixXd& magnitudes, Eigen::Index length,
                      int sample_rate) {
  Waveform w = reconstruct(with_magnitudes(noisy_features, magnitudes), length, sample_rate);
  w.samples = quantize_pcm16(w.samples);
  return w;
}

Enhanced enhance(const Waveform& noisy, ModelParams<float>& params, const ModelConfig& cfg, bool decode) {
  const FeatureSequence fs = analyze(noisy);
  ForwardResult r = run_model(fs.magnitudes, params, cfg, decode);
  Enhanced e;
  e.waveform = resynthesize(fs, r.magnitudes, noisy.size(), noisy.sample_rate);
  e.magnitudes = std::move(r.magnitudes);
  e.hypothesis = std::move(r.hypothesis);
  return e;
}

}  // namespace crnnse
