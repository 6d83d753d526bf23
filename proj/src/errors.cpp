#include "cbsde/errors.hpp"

namespace cbsde {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonMonotoneTimes: return "NonMonotoneTimes";
    case ErrorCode::NoCommonStep: return "NoCommonStep";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveState: return "NonPositiveState";
    case ErrorCode::InvalidTimes: return "InvalidTimes";
    case ErrorCode::InvalidCorrelation: return "InvalidCorrelation";
    case ErrorCode::ToleranceNotReached: return "ToleranceNotReached";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::RecursionDepth: return "RecursionDepth";
    case ErrorCode::NonDiagonalSigma: return "NonDiagonalSigma";
    case ErrorCode::DateMappingCollision: return "DateMappingCollision";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::ReferenceUnavailable: return "ReferenceUnavailable";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace cbsde
