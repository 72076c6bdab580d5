// include/crnnse/training.hpp

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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crnnse/checkpoint.hpp"
#include "crnnse/corpus.hpp"
#include "crnnse/curriculum.hpp"
#include "crnnse/metrics.hpp"
#include "crnnse/model.hpp"

namespace crnnse {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.8;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay_crnn = 2.8951e-5;
  double weight_decay_lm = 3.6998e-5;
  double lambda1 = 0.1;
  int epochs_max = 60;
  int plateau_patience = 10;
  double plateau_min_delta = 1e-4;
  std::uint64_t seed = 1;
  bool curriculum = true;
  bool lm = true;
  double clip_norm = 5.0;

  /// "desk" (laptop scale) or "paper" (full-scale optimizer settings).
  static TrainConfig preset(const std::string& name);
  static TrainConfig from_kv(const KeyValueConfig& kv, const std::string& base_preset = "desk");
  KeyValueConfig to_kv() const;
  /// Rejects non-positive rates, negative lambda1, patience < 1 and
  /// curriculum without a language model.
  void validate() const;
  /// Row label of the variant: CRNN, CRNN+LM or CRNN+LM+CL.
  std::string variant() const;
};

std::set<std::string> train_config_keys();

/// One epoch of the plateau rule on the validation reconstruction loss. An
/// improvement larger than min_delta resets the counter; otherwise the
/// counter grows, and reaching the patience in DenoiseOnly switches to Joint.
CurriculumState curriculum_update(CurriculumState state, double val_loss, const TrainConfig& cfg, int epoch = 0);

/// Reconstruction loss: squared frame error summed over bins, averaged over frames.
template <typename Scalar>
Var<Scalar> loss_re(const Var<Scalar>& denoised, const Var<Scalar>& clean) {
  return mse_loss(denoised, clean);
}

/// Decoder loss: cross-entropy of the teacher-forced logits against the
/// transcript followed by EOS.
template <typename Scalar>
Var<Scalar> loss_lm(const Var<Scalar>& logits, std::span<const int> transcript, const LmConfig& cfg) {
  const std::vector<int> targets = lm_targets(transcript, cfg);
  return cross_entropy(logits, targets);
}

/// L_re + lambda1 * L_lm in the Joint phase, L_re alone while denoising only.
/// The squared-norm penalty is applied by the optimizer as weight decay.
template <typename Scalar>
Var<Scalar> loss_combined(const Var<Scalar>& denoised, const Var<Scalar>& clean, const Var<Scalar>* logits,
                          std::span<const int> transcript, const LmConfig& lm, double lambda1, Phase phase) {
  Var<Scalar> re = loss_re(denoised, clean);
  if (phase == Phase::DenoiseOnly) return re;
  if (logits == nullptr || !logits->valid()) {
    throw PreconditionError("loss_combined: decoder outputs are required in the Joint phase");
  }
  return add(re, scale(loss_lm(*logits, transcript, lm), static_cast<Scalar>(lambda1)));
}

/// Features of one corpus utterance in the model's scalar type.
struct TrainingExample {
  std::string id;
  RowMatrix<float> noisy;
  RowMatrix<float> clean;
  std::vector<int> transcript;
};

TrainingExample make_example(const Utterance& u);
std::vector<TrainingExample> make_examples(const std::vector<Utterance>& utterances);

/// One row of the training log. NaN marks a value that was not computed.
struct EpochRecord {
  int epoch = 0;
  Phase phase = Phase::DenoiseOnly;
  double train_re = 0.0;
  double train_lm = std::numeric_limits<double>::quiet_NaN();
  double val_re = 0.0;
  double val_lm = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

/// CSV columns: epoch,phase,train_L_re,train_L_lm,val_L_re,val_L_lm,wall_seconds.
std::string training_log_header();
std::string training_log_row(const EpochRecord& r);

/// Output file names for a variant label inside an output directory.
struct RunFiles {
  std::filesystem::path log;
  std::filesystem::path best;
  std::filesystem::path last;
  std::filesystem::path phase1;
};
RunFiles run_files(const std::filesystem::path& out_dir, const std::string& variant);

struct TrainOptions {
  /// Directory for the log and checkpoints; nothing is written when empty.
  std::filesystem::path out_dir;
  /// Checkpoint to continue from (parameters, optimizer, curriculum, epoch).
  std::optional<std::filesystem::path> resume;
  /// Rows of an earlier run that the resumed run continues; copied to the log.
  std::vector<EpochRecord> prior_log;
  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  Checkpoint best;
  Checkpoint last;
  /// Epoch at which the plateau rule first fired (0 if it never did).
  int plateau_epoch = 0;
  RunFiles files;
};

/// Per-utterance Adam training. Every epoch shuffles the training set with a
/// generator seeded from (seed, epoch), so resumed runs follow the same path.
///
/// Variants: lm off trains the denoiser alone; lm on with curriculum off
/// trains the combined loss from the first epoch; lm on with curriculum on
/// trains the denoiser until the validation plateau, then the combined loss.
/// The plateau rule also runs when lm is off so that the point where the
/// curriculum would switch is saved as the phase-1 checkpoint.
///
/// Files (when out_dir is set): <variant>.log.csv, <variant>.best.ckpt (lowest
/// validation objective of the current phase), <variant>.last.ckpt (every
/// epoch, atomic) and <variant>.phase1.ckpt (at the plateau).
///
/// Throws NumericError on a non-finite loss or gradient.
TrainResult train(const std::vector<TrainingExample>& train_set, const std::vector<TrainingExample>& val_set,
                  const TrainConfig& cfg, const ModelConfig& model, const TrainOptions& options = {});

/// Reads the CSV written by train().
std::vector<EpochRecord> read_training_log(const std::filesystem::path& path);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  int plateau_epoch = 0;
  MetricSummary test;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  /// Noisy-input baseline on the test split (independent of the model).
  MetricSummary noisy;

  /// Median over seeds of one metric for a variant.
  double median(const std::string& variant, double MetricSummary::*field) const;
  std::string csv() const;
};

/// Trains CRNN, CRNN+LM+CL and CRNN+LM for every seed and scores each best
/// checkpoint on the test split. CRNN+LM+CL continues from the phase-1
/// checkpoint of the CRNN run with the same seed, so both share phase 1.
AblationResult run_ablation(const std::vector<Utterance>& train_split, const std::vector<Utterance>& val_split,
                            const std::vector<Utterance>& test_split, const TrainConfig& base,
                            const ModelConfig& model, const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir);

}  // namespace crnnse
