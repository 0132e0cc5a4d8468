#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ego {

enum class ErrorCode {
  kInvalidArgument,
  kNearPiRotation,
  kDegenerateGravityAlignment,
  kNoConvergence,
  kMismatchedFeatureDims,
  kShapeMismatch,
  kNoValidSamples,
  kVolumeTooSmall,
  kEmptyMesh,
  kPlacementFailure,
  kNonMonotonicTime,
  kParseError,
  kVersionMismatch,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// All library failures are reported through this exception type; `code()`
/// lets callers branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace ego
