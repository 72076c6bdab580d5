// include/crnnse/metrics.hpp

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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crnnse/corpus.hpp"
#include "crnnse/model.hpp"

namespace crnnse {

/// Every dB value is clamped to [-kDbCap, kDbCap].
inline constexpr double kDbCap = 100.0;

/// 10 log10(num / den) clamped to +-100 dB; a zero denominator gives +100 and
/// a zero numerator -100.
double capped_db(double num, double den);

/// Global SNR of `estimate` against `clean`: 10 log10(sum clean^2 / sum (clean - estimate)^2).
double snr_db(const Eigen::VectorXd& clean, const Eigen::VectorXd& estimate);

/// Log-spectral distance in dB: mean over frames of the RMS over bins of
/// 20 log10((est + eps) / (clean + eps)).
double lsd_db(const Eigen::MatrixXd& clean_mag, const Eigen::MatrixXd& est_mag, double eps = 1e-8);

/// Feature MSE with the training reduction: squared error summed per frame, averaged over frames.
double frame_mse(const Eigen::MatrixXd& clean_mag, const Eigen::MatrixXd& est_mag);

struct BssComponents {
  Eigen::VectorXd s_target;
  Eigen::VectorXd e_interf;
  Eigen::VectorXd e_artif;
};

struct BssResult {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

/// Orthogonal decomposition of `estimate` against span{clean} and span{clean, noise}.
BssComponents bss_decompose(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise,
                            const Eigen::VectorXd& estimate);
BssResult bss_eval(const Eigen::VectorXd& clean, const Eigen::VectorXd& noise, const Eigen::VectorXd& estimate);

/// Levenshtein distance (substitutions + insertions + deletions).
int edit_distance(std::span<const int> ref, std::span<const int> hyp);

/// edits / len(ref); with an empty reference, 0 for an empty hypothesis and len(hyp) otherwise.
double word_error_rate(std::span<const int> ref, std::span<const int> hyp);

struct UtteranceMetrics {
  std::string id;
  double snr_db = 0.0;
  double lsd = 0.0;
  double mse = 0.0;
  double sir_db = 0.0;
  double sdr_db = 0.0;
  double sar_db = 0.0;
  double wer = 0.0;
  bool correct = false;
  int edits = 0;
  int ref_words = 0;
};

struct MetricSummary {
  double snr = 0.0;
  double lsd = 0.0;
  double mse = 0.0;
  double sir = 0.0;
  double sdr = 0.0;
  double sar = 0.0;
  double wer = 0.0;  // corpus level: total edits / total reference words
  double ser = 0.0;  // fraction of utterances with any edit
};

struct MetricReport {
  std::vector<UtteranceMetrics> rows;
  MetricSummary summary;

  void aggregate();
  /// Per-utterance CSV: id,snr_db,lsd,mse,sir_db,sdr_db,sar_db,wer,correct.
  std::string csv() const;
  /// Aggregate JSON object with exactly the keys snr, lsd, mse, sir, sdr, sar, wer, ser.
  std::string json() const;
};

/// What is scored against the clean reference.
enum class EstimateSource { Model, Noisy, Clean };

std::string to_string(EstimateSource s);
EstimateSource parse_estimate_source(const std::string& s);

/// Scores one utterance. Waveform metrics use the interior samples (those
/// covered by two analysis frames); the estimate is on the 16-bit grid. The
/// proxy recognizer is the greedy decoder run on the model's final state for
/// the estimate's source input (noisy for Model/Noisy, clean for Clean).
UtteranceMetrics evaluate_utterance(const Utterance& utt, ModelParams<float>& params, const ModelConfig& cfg,
                                    EstimateSource source = EstimateSource::Model);

/// Scores every utterance (in parallel when threads > 1) and aggregates.
MetricReport evaluate(const std::vector<Utterance>& utterances, ModelParams<float>& params, const ModelConfig& cfg,
                      EstimateSource source = EstimateSource::Model, unsigned threads = 0);

}  // namespace crnnse
