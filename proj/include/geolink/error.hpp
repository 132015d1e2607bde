// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geolink {

enum class ErrorCode {
  NonFinite,
  BadSampleCount,
  BadK,
  BadDim,
  TooFewPoints,
  DimMismatch,
  ShapeError,
  ZeroVector,
  BatchTooSmall,
  AlignmentError,
  BadCamera,
  ParseError,
  MissingView,
  MissingGroundTruth,
  EmptySplit,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace geolink
