#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace converse {

enum class ErrorCode {
  InvalidShape,
  RealnessViolation,
  PadTooLarge,
  CropTooLarge,
  IndivisibleShape,
  KernelTooLarge,
  InvalidKernel,
  ScaleNotOne,
  DimensionMismatch,
  NonFinite,
  FileNotFound,
  MalformedKernel,
  UnsupportedImageFormat,
  MalformedParameters,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::RealnessViolation: return "RealnessViolation";
    case ErrorCode::PadTooLarge: return "PadTooLarge";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::IndivisibleShape: return "IndivisibleShape";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::ScaleNotOne: return "ScaleNotOne";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::MalformedKernel: return "MalformedKernel";
    case ErrorCode::UnsupportedImageFormat: return "UnsupportedImageFormat";
    case ErrorCode::MalformedParameters: return "MalformedParameters";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// All library failures surface as this exception; code() identifies the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace converse
