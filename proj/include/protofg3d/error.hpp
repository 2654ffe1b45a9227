#pragma once

#include <stdexcept>
#include <string>

namespace protofg3d {

enum class ErrorCode {
  Contract,
  IoFailure,
  FormatMismatch,
  CountMismatch,
  RaggedViews,
  ParseError,
  UnknownKey,
  EmptyClass,
  DimensionMismatch,
  InfeasibleSeparation,
  NonConvergence,
  NumericalOverflow,
  NonFiniteLoss,
  DegenerateEmbedding,
};

enum class ErrorCategory { Usage, Data, Numerical };

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Contract: return "ContractError";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::RaggedViews: return "RaggedViews";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InfeasibleSeparation: return "InfeasibleSeparation";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
  }
  return "Error";
}

inline ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Contract:
      return ErrorCategory::Usage;
    case ErrorCode::NonConvergence:
    case ErrorCode::NumericalOverflow:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateEmbedding:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

/// All library failures are reported through this exception; `code()` tells
/// them apart and `what()` carries the context (file, line, shape id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
  std::string message_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::Contract, message);
}

}  // namespace protofg3d
