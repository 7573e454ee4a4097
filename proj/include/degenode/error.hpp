#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace degenode {

enum class ErrorCode {
  NonPositiveParameter,
  NotSymmetric,
  NotCoercive,
  DimensionMismatch,
  NonPositiveEpsilon,
  ZeroInitialPosition,
  StepSizeUnderflow,
  NonFiniteState,
  EmptyTrajectory,
  WindowTooShort,
  NonPositiveEnergy,
  AlphaNotGreaterThanL,
  RegimeMismatch,
  WrongModel,
  NotAnEigenpair,
  HypothesesViolated,
  InvalidArgument,
  InvalidConfig,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotCoercive: return "NotCoercive";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::ZeroInitialPosition: return "ZeroInitialPosition";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::NonPositiveEnergy: return "NonPositiveEnergy";
    case ErrorCode::AlphaNotGreaterThanL: return "AlphaNotGreaterThanL";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::WrongModel: return "WrongModel";
    case ErrorCode::NotAnEigenpair: return "NotAnEigenpair";
    case ErrorCode::HypothesesViolated: return "HypothesesViolated";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception type for every failure raised by the library. The code is
/// stable and machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace degenode
