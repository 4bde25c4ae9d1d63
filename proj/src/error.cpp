#include "mr/error.hpp"

namespace mr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::DegenerateTriple: return "DegenerateTriple";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::LayoutNotRecognized: return "LayoutNotRecognized";
    case ErrorCode::NoFeatures: return "NoFeatures";
    case ErrorCode::OutOfBoundsRule: return "OutOfBoundsRule";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace mr
