// Copyright 2026 The Rubricopt Authors
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

namespace rubricopt {

enum class ErrorCode {
  kInvalidArgument,  // precondition or validation failure
  kNotFound,
  kConflict,         // state conflict, e.g. resuming a job that is not waiting
  kTransport,        // network failure after retries
  kProtocol,         // malformed request/response framing or payload
  kClassification,   // a batch failed after re-requests
  kStorage,
  kCancelled,
  kInternal,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. The code maps onto the service's
// error envelope; `details` carries optional machine-readable context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const { return code_; }
  const std::string& details() const { return details_; }

 private:
  ErrorCode code_;
  std::string details_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::string details = {}) {
  throw Error(code, message, std::move(details));
}

}  // namespace rubricopt
