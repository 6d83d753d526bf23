#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbsde {

enum class ErrorCode {
  InvalidArgument,
  NonMonotoneTimes,
  NoCommonStep,
  OutOfRange,
  CholeskyFailure,
  ShapeMismatch,
  NonFiniteGradient,
  NonFiniteValue,
  Diverged,
  DimensionMismatch,
  NonPositiveState,
  InvalidTimes,
  InvalidCorrelation,
  ToleranceNotReached,
  NoSignChange,
  MaxIterations,
  BracketFailure,
  RecursionDepth,
  NonDiagonalSigma,
  DateMappingCollision,
  OutOfDomain,
  ReferenceUnavailable,
  Io,
  Config,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Single exception type for the library; the code is what callers branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cbsde
