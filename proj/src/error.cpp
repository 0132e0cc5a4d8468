#include "ego/error.hpp"

namespace ego {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNearPiRotation: return "NearPiRotation";
    case ErrorCode::kDegenerateGravityAlignment: return "DegenerateGravityAlignment";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kMismatchedFeatureDims: return "MismatchedFeatureDims";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNoValidSamples: return "NoValidSamples";
    case ErrorCode::kVolumeTooSmall: return "VolumeTooSmall";
    case ErrorCode::kEmptyMesh: return "EmptyMesh";
    case ErrorCode::kPlacementFailure: return "PlacementFailure";
    case ErrorCode::kNonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ego
