// Copyright 2026 The Semstack Authors.
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

#ifndef SEMSTACK_STATUS_HPP_
#define SEMSTACK_STATUS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace semstack {

enum class ErrorCode {
  kConfig,
  kShape,
  kOutOfRange,
  kState,
  kNumeric,
  kFormat,
  kChecksum,
  kUnsupportedVersion,
  kIo,
  kUndefinedMetric,
  kValidation,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kState: return "state";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kValidation: return "validation";
  }
  return "unknown";
}

// Every failure in the library surfaces as an Error carrying a category, so
// callers (CLI, HTTP layer) can map it to an exit code or a wire error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace semstack

#endif  // SEMSTACK_STATUS_HPP_
