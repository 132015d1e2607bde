// SPDX-License-Identifier: Apache-2.0
#include "geolink/error.hpp"

namespace geolink {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::BadSampleCount: return "BadSampleCount";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::BadDim: return "BadDim";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::BadCamera: return "BadCamera";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingView: return "MissingView";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace geolink
