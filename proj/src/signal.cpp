// src/signal.cpp

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

#include "crnnse/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace crnnse {

namespace {

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return engine;
}

void check_config(const StftConfig& c) {
  if (c.frame_len <= 0 || c.hop <= 0 || c.fft_size < c.frame_len) {
    throw PreconditionError("stft: invalid frame_len/hop/fft_size");
  }
  if (c.hop * 2 != c.frame_len) throw PreconditionError("stft: hop must be half the frame length");
}

}  // namespace

Eigen::VectorXd hann_window(int length) {
  Eigen::VectorXd w(length);
  for (int n = 0; n < length; ++n) w(n) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

Eigen::Index frame_count(Eigen::Index samples, const StftConfig& config) {
  if (samples < config.frame_len) return 0;
  return (samples - config.frame_len) / config.hop + 1;
}

Eigen::MatrixXd frame_and_window(const Waveform& w, const StftConfig& config) {
  check_config(config);
  if (w.sample_rate <= 0) throw PreconditionError("frame_and_window: sample rate must be positive");
  const Eigen::Index T = frame_count(w.size(), config);
  if (T == 0) {
    throw PreconditionError("frame_and_window: signal of " + std::to_string(w.size()) +
                            " samples is shorter than one frame (" + std::to_string(config.frame_len) + ")");
  }
  const Eigen::VectorXd window = hann_window(config.frame_len);
  Eigen::MatrixXd framed(T, config.frame_len);
  for (Eigen::Index t = 0; t < T; ++t) {
    framed.row(t) = (w.samples.segment(t * config.hop, config.frame_len).array() * window.array()).transpose();
  }
  return framed;
}

FeatureSequence stft_magnitude(const Eigen::MatrixXd& framed, const StftConfig& config) {
  check_config(config);
  if (framed.cols() != config.frame_len) {
    throw DimensionError("stft_magnitude: frames have " + std::to_string(framed.cols()) + " samples, expected " +
                         std::to_string(config.frame_len));
  }
  const Eigen::Index T = framed.rows();
  const int bins = config.bins();
  FeatureSequence fs;
  fs.config = config;
  fs.magnitudes.resize(T, config.feature_dim());
  fs.phases.resize(T, bins);
  fs.nyquist.resize(T);

  std::vector<double> buffer(static_cast<std::size_t>(config.fft_size), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < T; ++t) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (int n = 0; n < config.frame_len; ++n) buffer[static_cast<std::size_t>(n)] = framed(t, n);
    fft_engine().fwd(spectrum, buffer);
    for (int k = 0; k < bins; ++k) {
      const auto& z = spectrum[static_cast<std::size_t>(k)];
      const double mag = std::abs(z);
      if (k < config.feature_dim()) fs.magnitudes(t, k) = mag;
      else fs.nyquist(t) = mag;
      // Exact zeros keep a zero phase so silent input maps to silent output.
      fs.phases(t, k) = mag == 0.0 ? 0.0 : std::arg(z);
    }
  }
  return fs;
}

FeatureSequence analyze(const Waveform& w, const StftConfig& config) {
  return stft_magnitude(frame_and_window(w, config), config);
}

Waveform reconstruct(const FeatureSequence& fs, int sample_rate) {
  const StftConfig& c = fs.config;
  check_config(c);
  if (!fs.has_phases()) throw PreconditionError("reconstruct: phases were not retained");
  const Eigen::Index T = fs.frames();
  if (T < 1) throw PreconditionError("reconstruct: no frames");
  if (fs.phases.rows() != T) {
    throw DimensionError("reconstruct: " + std::to_string(T) + " magnitude frames but " +
                         std::to_string(fs.phases.rows()) + " phase frames");
  }
  if (fs.magnitudes.cols() != c.feature_dim() || fs.phases.cols() != c.bins()) {
    throw DimensionError("reconstruct: feature width does not match the transform size");
  }
  const bool keep_nyquist = fs.nyquist.size() == T;

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples = Eigen::VectorXd::Zero((T - 1) * c.hop + c.frame_len);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(c.bins()));
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int k = 0; k < c.bins(); ++k) {
      double mag = 0.0;
      if (k < c.feature_dim()) mag = fs.magnitudes(t, k);
      else if (keep_nyquist) mag = fs.nyquist(t);
      spectrum[static_cast<std::size_t>(k)] = std::polar(mag, fs.phases(t, k));
    }
    fft_engine().inv(frame, spectrum, c.fft_size);
    for (int n = 0; n < c.frame_len; ++n) out.samples(t * c.hop + n) += frame[static_cast<std::size_t>(n)];
  }
  return out;
}

Waveform reconstruct(const FeatureSequence& fs, Eigen::Index length, int sample_rate) {
  Waveform w = reconstruct(fs, sample_rate);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(length);
  const Eigen::Index n = std::min(length, w.size());
  padded.head(n) = w.samples.head(n);
  w.samples = std::move(padded);
  return w;
}

FeatureSequence with_magnitudes(const FeatureSequence& noisy, const Eigen::MatrixXd& estimate) {
  if (estimate.rows() != noisy.frames() || estimate.cols() != noisy.magnitudes.cols()) {
    throw DimensionError("with_magnitudes: estimate shape does not match the noisy features");
  }
  FeatureSequence out;
  out.magnitudes = estimate;
  out.phases = noisy.phases;
  out.config = noisy.config;
  return out;
}

SampleRange interior_range(Eigen::Index samples, const StftConfig& config) {
  const Eigen::Index T = frame_count(samples, config);
  if (T < 2) return {0, 0};
  return {config.hop, T * config.hop};
}

}  // namespace crnnse
