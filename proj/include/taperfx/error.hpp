/* Copyright 2026 The taperfx Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taperfx {

enum class ErrorCode {
  InvalidConfig,
  InvalidArgument,
  NotRepresentable,
  ParseError,
  UnsupportedWidth,
  LengthMismatch,
  ContractViolation,
  QuireOverflow,
  ShapeMismatch,
  EmptyModel,
  UnknownLayer,
  MissingBlob,
  ChecksumMismatch,
  NotFoldable,
  EmptyBatch,
  DatasetError,
  TileOverflow,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotRepresentable: return "NotRepresentable";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedWidth: return "UnsupportedWidth";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::QuireOverflow: return "QuireOverflow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::UnknownLayer: return "UnknownLayer";
    case ErrorCode::MissingBlob: return "MissingBlob";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::NotFoldable: return "NotFoldable";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::TileOverflow: return "TileOverflow";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a stable, machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace taperfx
