// include/crnnse/wav.hpp

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

#include "crnnse/signal.hpp"

namespace crnnse {

/// Rounds to the 16-bit PCM grid (clipping to [-1, 1 - 2^-15]) and back.
Eigen::VectorXd quantize_pcm16(const Eigen::VectorXd& samples);

/// Writes 16-bit little-endian mono PCM. The file is written under a temporary
/// name and renamed into place.
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// Reads 16-bit PCM mono at 16 kHz; other encodings, channel counts and rates
/// are rejected with FormatError; unreadable or truncated files raise IoError.
Waveform read_wav(const std::filesystem::path& path);

}  // namespace crnnse
