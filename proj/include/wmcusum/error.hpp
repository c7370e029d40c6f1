#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmcusum {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  NonConvergence,
  NotPositiveDefinite,
  UnstableMatrix,
  UnstableClosedLoop,
  InvalidAttackWindow,
  DegenerateSystem,
  DegenerateDirection,
  ZeroDivergence,
  NoImprovement,
  StreamExhausted,
  AllFalseAlarms,
  ParseError,
  MissingKey,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::UnstableMatrix: return "UnstableMatrix";
    case ErrorCode::UnstableClosedLoop: return "UnstableClosedLoop";
    case ErrorCode::InvalidAttackWindow: return "InvalidAttackWindow";
    case ErrorCode::DegenerateSystem: return "DegenerateSystem";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::ZeroDivergence: return "ZeroDivergence";
    case ErrorCode::NoImprovement: return "NoImprovement";
    case ErrorCode::StreamExhausted: return "StreamExhausted";
    case ErrorCode::AllFalseAlarms: return "AllFalseAlarms";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code. All library failures
/// are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace wmcusum
