#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace secfpp {

enum class ErrorCode {
  RangeExceeded,
  AmbiguousValue,
  DivisionByZero,
  BadParams,
  DegreeMismatch,
  InsufficientShares,
  DecodingFailure,
  RankExceeded,
  ShapeMismatch,
  ConvergenceFailure,
  OverflowDetected,
  BadConfig,
  PrecisionLoss,
  DomainError,
  InsufficientSamples,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RangeExceeded: return "RangeExceeded";
    case ErrorCode::AmbiguousValue: return "AmbiguousValue";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::DegreeMismatch: return "DegreeMismatch";
    case ErrorCode::InsufficientShares: return "InsufficientShares";
    case ErrorCode::DecodingFailure: return "DecodingFailure";
    case ErrorCode::RankExceeded: return "RankExceeded";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::OverflowDetected: return "OverflowDetected";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::PrecisionLoss: return "PrecisionLoss";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map them onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace secfpp
