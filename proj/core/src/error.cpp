// Copyright 2026 The regcal Authors
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

#include "regcal/error.hpp"

namespace regcal {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewInstances: return "TooFewInstances";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::TargetColumnMissing: return "TargetColumnMissing";
    case ErrorKind::NonNumericColumn: return "NonNumericColumn";
    case ErrorKind::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace regcal
