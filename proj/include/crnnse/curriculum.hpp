// include/crnnse/curriculum.hpp

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

#include <limits>
#include <string>

namespace crnnse {

enum class Phase { DenoiseOnly, Joint };

std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

/// Plateau tracker for the two-phase schedule. The phase only ever moves from
/// DenoiseOnly to Joint.
struct CurriculumState {
  Phase phase = Phase::DenoiseOnly;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  /// Epoch (1-based) at which the switch happened; 0 while denoising only.
  int switch_epoch = 0;
};

}  // namespace crnnse
