#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reperfq {

/// Stable machine-readable failure codes. The CLI prints these verbatim on
/// stderr, so renaming one is a breaking interface change.
enum class ErrorCode {
  // acquisition / input validation
  TooShort,
  DimensionMismatch,
  NonMonotonicTimes,
  OutOfRangeIntensity,
  InvalidConfig,
  // ingestion
  ParseError,
  MissingFile,
  UnsupportedPixelFormat,
  IoError,
  EmptyMask,
  // phase classifier
  IndexOutOfRange,
  EmptyDataset,
  LabelLengthMismatch,
  EmptySequence,
  NoValidPath,
  // registration
  Diverged,
  NoUsableFrames,
  EmptyAtlasSet,
  // projection / segmentation / metrics
  EmptyInput,
  LengthMismatch,
  DegenerateInput,
  SingleClass,
  NonConvergence,
  OutOfRange,
  // quantification
  TdtTooSmall,
  NoCompleteViewPair,
  // phantom
  InvalidSpec,
};

/// Coarse class of a failure, mapped onto CLI exit status:
/// Validation -> 2, Pipeline -> 3, Io -> 4.
enum class ErrorKind { Validation, Pipeline, Io };

std::string_view to_string(ErrorCode code);
ErrorKind kind_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  ErrorKind kind() const { return kind_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace reperfq
