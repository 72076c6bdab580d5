// include/crnnse/checkpoint.hpp

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
#include <string>

#include "crnnse/adam.hpp"
#include "crnnse/config.hpp"
#include "crnnse/curriculum.hpp"
#include "crnnse/model.hpp"

namespace crnnse {

/// Everything needed to resume training or run inference.
///
/// On disk (all integers and floats little-endian):
///   "CRNNSECK"  u32 version
///   u64 length + metadata text (key = value lines; includes the model config)
///   u32 count, then per parameter: u32 name length, name, u32 rank,
///       u64 dims[rank], f32 data[product(dims)]
///   two optimizer groups (denoiser, decoder): i64 step, f64 lr, beta1, beta2,
///       epsilon, weight_decay, u32 slots, then f32 m and v per slot
///   u8 phase, f64 best_val_loss, i32 epochs_since_improvement, i32 switch_epoch
///   i32 epoch
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  ModelParams<float> params;
  AdamState<float> adam_crnn;
  AdamState<float> adam_lm;
  CurriculumState curriculum;
  int epoch = 0;
  /// Free-form training metadata (seed, variant, best objective, ...).
  KeyValueConfig metadata;
};

/// Writes via a temporary file and rename, so an interrupted write never
/// leaves a truncated checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws IoError when the file cannot be read and CheckpointError when the
/// contents are not a valid checkpoint or disagree with their own model config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError when `ckpt` was trained with a different model layout.
void require_compatible(const Checkpoint& ckpt, const ModelConfig& expected);

}  // namespace crnnse
