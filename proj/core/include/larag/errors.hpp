// Copyright 2026-present the larag project
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

namespace larag {

enum class ErrorCode {
  InfeasibleAlignment,
  DimensionMismatch,
  LengthMismatch,
  EmptyCorpus,
  EmptyDatastore,
  EmptyReference,
  InsufficientSequences,
  InvalidParams,
  UnknownStrategy,
  NonFiniteWeights,
  FormatViolation,
  VersionMismatch,
  CorruptFile,
  IoFailure,
};

const char* error_name(ErrorCode code);

/// Exception carrying a stable error name; the CLI prints the name and
/// exits 1 on any data error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const char* name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

inline const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InfeasibleAlignment: return "InfeasibleAlignment";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyDatastore: return "EmptyDatastore";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::InsufficientSequences: return "InsufficientSequences";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::UnknownStrategy: return "UnknownStrategy";
    case ErrorCode::NonFiniteWeights: return "NonFiniteWeights";
    case ErrorCode::FormatViolation: return "FormatViolation";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

}  // namespace larag
