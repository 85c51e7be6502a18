#include "reperfq/error.hpp"

namespace reperfq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonMonotonicTimes: return "NonMonotonicTimes";
    case ErrorCode::OutOfRangeIntensity: return "OutOfRangeIntensity";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedPixelFormat: return "UnsupportedPixelFormat";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::NoValidPath: return "NoValidPath";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NoUsableFrames: return "NoUsableFrames";
    case ErrorCode::EmptyAtlasSet: return "EmptyAtlasSet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::TdtTooSmall: return "TdtTooSmall";
    case ErrorCode::NoCompleteViewPair: return "NoCompleteViewPair";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    // Filesystem-level failures; malformed content (ParseError and friends)
    // counts as input validation instead.
    case ErrorCode::MissingFile:
    case ErrorCode::IoError:
      return ErrorKind::Io;
    case ErrorCode::NoValidPath:
    case ErrorCode::Diverged:
    case ErrorCode::NoUsableFrames:
    case ErrorCode::EmptyAtlasSet:
    case ErrorCode::EmptyMask:
    case ErrorCode::DegenerateInput:
    case ErrorCode::SingleClass:
    case ErrorCode::NonConvergence:
    case ErrorCode::TdtTooSmall:
    case ErrorCode::NoCompleteViewPair:
      return ErrorKind::Pipeline;
    default:
      return ErrorKind::Validation;
  }
}

}  // namespace reperfq
