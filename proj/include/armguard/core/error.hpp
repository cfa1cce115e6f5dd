#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace armguard {

enum class ErrorCode {
  InvalidArgument,
  IllegalTransition,
  DimensionMismatch,
  ShapeMismatch,
  LengthMismatch,
  EmptyInput,
  InsufficientFrames,
  NotWarm,
  Truncated,
  BadJson,
  UnknownType,
  OversizePayload,
  Malformed,
  UnknownDevice,
  UnknownAlert,
  CorruptLog,
  DegenerateLabels,
  ValidationFailed,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::NotWarm: return "NotWarm";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadJson: return "BadJson";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::OversizePayload: return "OversizePayload";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::UnknownAlert: return "UnknownAlert";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace armguard
