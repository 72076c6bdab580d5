// src/log.cpp

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

#include "crnnse/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace crnnse {

int verbosity() {
  static const int level = [] {
    const char* v = std::getenv("CRNNSE_VERBOSITY");
    if (v == nullptr || *v == '\0') return 1;
    return std::atoi(v);
  }();
  return level;
}

void log_message(int level, const std::string& message) {
  if (level > verbosity()) return;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  std::cerr << message << '\n';
}

}  // namespace crnnse
