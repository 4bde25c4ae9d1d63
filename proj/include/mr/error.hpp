#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mr {

enum class ErrorCode {
  DecodeError,
  EmptyImage,
  IoError,
  SingularTransform,
  DimensionMismatch,
  OutOfBounds,
  ImageTooSmall,
  DegenerateTriple,
  DegenerateConfiguration,
  TooFewMatches,
  NoConsensus,
  LayoutNotRecognized,
  NoFeatures,
  OutOfBoundsRule,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can report it in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mr
