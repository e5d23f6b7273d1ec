// Copyright 2026 The densflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace densflow {

enum class ErrorCode {
  kInvalidArgument,
  kOverlappingRuns,
  kOffsetOutOfBounds,
  kShapeMismatch,
  kEmptyInstance,
  kThresholdOutOfRange,
  kMissingPair,
  kInfeasibleSpec,
  kFileNotFound,
  kBadMagic,
  kDimsMismatch,
  kCorruptFile,
  kIoFailure,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// contract violation so callers (and the CLI exit-code mapping) can branch.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace densflow
