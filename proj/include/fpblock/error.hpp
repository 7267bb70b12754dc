#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fpblock {

enum class ErrorCode {
  RankDeficient,
  ConvergenceFailure,
  ShapeMismatch,
  OverlappingIntervals,
  InnerBreakdown,
  ParseError,
  UnsupportedField,
  NotSymmetric,
  RankDeficientStart,
  SingularInnerSolve,
  EmptySelection,
  NearDependentRitzVectors,
  CapReached,
  AssumptionUnsatisfiable,
  InvalidArgument,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OverlappingIntervals: return "OverlappingIntervals";
    case ErrorCode::InnerBreakdown: return "InnerBreakdown";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedField: return "UnsupportedField";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::RankDeficientStart: return "RankDeficientStart";
    case ErrorCode::SingularInnerSolve: return "SingularInnerSolve";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::NearDependentRitzVectors: return "NearDependentRitzVectors";
    case ErrorCode::CapReached: return "CapReached";
    case ErrorCode::AssumptionUnsatisfiable: return "AssumptionUnsatisfiable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fpblock
