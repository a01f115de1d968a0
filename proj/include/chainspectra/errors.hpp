#pragma once

#include <stdexcept>
#include <string>

namespace chainspectra {

enum class ErrorCode {
  DegenerateTransfer,
  InvalidA,
  InvalidConfig,
  ConvergenceFailure,
  IllConditionedBasis,
  NoEdgeState,
  GapClosed,
  DegenerateDenominator,
  NoMatch,
  PatternUndetermined,
  StepUnderflow,
  ResonanceEncountered,
  SingularFactor,
  SizeCapExceeded,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateTransfer: return "DegenerateTransfer";
    case ErrorCode::InvalidA: return "InvalidA";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::IllConditionedBasis: return "IllConditionedBasis";
    case ErrorCode::NoEdgeState: return "NoEdgeState";
    case ErrorCode::GapClosed: return "GapClosed";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::PatternUndetermined: return "PatternUndetermined";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::ResonanceEncountered: return "ResonanceEncountered";
    case ErrorCode::SingularFactor: return "SingularFactor";
    case ErrorCode::SizeCapExceeded: return "SizeCapExceeded";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chainspectra
