// Copyright 2026 The dale-forge Authors.
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

namespace dale {

enum class ErrorCode {
  kIoError,
  kParseError,
  kDuplicateId,
  kInvalidConfig,
  kMissingStat,
  kDegenerateProbability,
  kEmptyDistribution,
  kEmptyText,
  kKeyNotFound,
  kTransportError,
  kProtocolError,
  kDimMismatch,
  kZeroVector,
  kOutOfBounds,
  kMissingLabel,
  kUnknownTask,
  kBackendError,
  kMalformedOutput,
  kUnknownSource,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMissingStat: return "MissingStat";
    case ErrorCode::kDegenerateProbability: return "DegenerateProbability";
    case ErrorCode::kEmptyDistribution: return "EmptyDistribution";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kKeyNotFound: return "KeyNotFound";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kUnknownTask: return "UnknownTask";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kMalformedOutput: return "MalformedOutput";
    case ErrorCode::kUnknownSource: return "UnknownSource";
  }
  return "Unknown";
}

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dale
