#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace extremeforge {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptHeader,
  IoError,
  ParseError,
  ClassOutOfRange,
  ConfidenceOutOfRange,
  DuplicateImageId,
  ImageTooSmall,
  ShapeMismatch,
  StyleMismatch,
  ParamsKindMismatch,
  ParamOutOfRange,
  EmptyDataset,
  UnknownConditionDir,
  PlanInvalid,
  UnknownImageId,
  UnknownLabel,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StyleMismatch: return "StyleMismatch";
    case ErrorCode::ParamsKindMismatch: return "ParamsKindMismatch";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownConditionDir: return "UnknownConditionDir";
    case ErrorCode::PlanInvalid: return "PlanInvalid";
    case ErrorCode::UnknownImageId: return "UnknownImageId";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; code() lets
// callers branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace extremeforge
