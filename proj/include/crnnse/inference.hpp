// include/crnnse/inference.hpp

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

#include <vector>

#include "crnnse/model.hpp"
#include "crnnse/signal.hpp"

namespace crnnse {

/// Magnitude features in the model's scalar type.
RowMatrix<float> model_frames(const Eigen::MatrixXd& magnitudes);

struct Enhanced {
  Eigen::MatrixXd magnitudes;    // T x 256 denoised features
  Waveform waveform;             // same length as the input, 16-bit quantized
  std::vector<int> hypothesis;   // greedy transcript (empty unless requested)
};

/// Denoised magnitudes and the decoder's greedy transcript for one input.
struct ForwardResult {
  Eigen::MatrixXd magnitudes;
  std::vector<int> hypothesis;
};

/// Runs the denoiser (and optionally the greedy decoder) without recording gradients.
ForwardResult run_model(const Eigen::MatrixXd& magnitudes, ModelParams<float>& params, const ModelConfig& cfg,
                        bool decode);

/// Magnitude-only enhancement: analyse, denoise, resynthesise with the noisy
/// phases, then round to the 16-bit PCM grid so that files written from the
/// result measure the same as the in-memory signal.
Enhanced enhance(const Waveform& noisy, ModelParams<float>& params, const ModelConfig& cfg, bool decode = false);

/// Waveform from replacement magnitudes and the phases of `noisy_features`,
/// trimmed or padded to `length` and quantized to 16 bits.
Waveform resynthesize(const FeatureSequence& noisy_features, const Eigen::MatrixXd& magnitudes, Eigen::Index length,
                      int sample_rate);

}  // namespace crnnse
