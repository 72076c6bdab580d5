// include/crnnse/errors.hpp

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

#include <stdexcept>
#include <string>

namespace crnnse {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or signal shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incoherent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system or format failure (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Readable file in an encoding the pipeline does not accept.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// NaN/Inf encountered during training (CLI exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint does not match the model or corpus (CLI exit code 5).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace crnnse
