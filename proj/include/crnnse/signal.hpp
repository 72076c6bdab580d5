// include/crnnse/signal.hpp

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

#include <Eigen/Dense>

#include "crnnse/errors.hpp"

namespace crnnse {

struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Eigen::Index size() const { return samples.size(); }
};

/// 16 ms frames at 16 kHz with 50% overlap, zero-padded to a 512-point DFT.
struct StftConfig {
  int frame_len = 256;
  int hop = 128;
  int fft_size = 512;

  int bins() const { return fft_size / 2 + 1; }
  int feature_dim() const { return fft_size / 2; }
};

/// Per-frame magnitude features plus what synthesis needs to invert them.
///
/// magnitudes holds bins 0..fft_size/2-1 (T x 256); the Nyquist bin is not a
/// feature. phases holds all T x 257 bins. nyquist keeps the dropped bin's
/// magnitude for exact analysis/synthesis round trips; it is emptied whenever
/// the magnitudes are replaced by an estimate, and synthesis then treats the
/// Nyquist bin as zero.
struct FeatureSequence {
  Eigen::MatrixXd magnitudes;
  Eigen::MatrixXd phases;
  Eigen::VectorXd nyquist;
  StftConfig config;

  Eigen::Index frames() const { return magnitudes.rows(); }
  bool has_phases() const { return phases.size() > 0; }
};

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
Eigen::VectorXd hann_window(int length);

/// Number of full frames in a signal of `samples` samples (0 if shorter than a frame).
Eigen::Index frame_count(Eigen::Index samples, const StftConfig& config = {});

/// Splits a waveform into T = floor((N - frame_len) / hop) + 1 Hann-windowed
/// frames, returned as a T x frame_len matrix.
Eigen::MatrixXd frame_and_window(const Waveform& w, const StftConfig& config = {});

/// 512-point DFT of each zero-padded frame; keeps 256 magnitude bins and all phases.
FeatureSequence stft_magnitude(const Eigen::MatrixXd& framed, const StftConfig& config = {});

/// frame_and_window followed by stft_magnitude.
FeatureSequence analyze(const Waveform& w, const StftConfig& config = {});

/// Overlap-add synthesis from magnitudes and retained phases. The output has
/// (T - 1) * hop + frame_len samples; samples covered by two frames reproduce
/// the analysed signal exactly because the periodic Hann window sums to one
/// at 50% overlap.
Waveform reconstruct(const FeatureSequence& fs, int sample_rate = 16000);

/// Same as reconstruct() but zero-pads or truncates to `length` samples.
Waveform reconstruct(const FeatureSequence& fs, Eigen::Index length, int sample_rate);

/// Copy of `noisy` with its magnitudes replaced by `estimate` (Nyquist dropped).
FeatureSequence with_magnitudes(const FeatureSequence& noisy, const Eigen::MatrixXd& estimate);

/// Sample range [begin, end) covered by two overlapping frames.
struct SampleRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};
SampleRange interior_range(Eigen::Index samples, const StftConfig& config = {});

}  // namespace crnnse
