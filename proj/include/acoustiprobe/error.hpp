#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acoustiprobe {

enum class ErrorCode {
  InvalidSpec,
  InvalidInput,
  TooShort,
  TruncatedRecording,
  AmbiguousSegmentation,
  UnsupportedFormat,
  Parse,
  IncompatibleVersion,
  Io,
};

/// Stable machine-readable name, e.g. "invalid-spec".
constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::TooShort: return "too-short";
    case ErrorCode::TruncatedRecording: return "truncated-recording";
    case ErrorCode::AmbiguousSegmentation: return "ambiguous-segmentation";
    case ErrorCode::UnsupportedFormat: return "unsupported-format";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::IncompatibleVersion: return "incompatible-version";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace acoustiprobe
