#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orchard {

enum class ErrorCode {
  kNonPositiveDepth,
  kInvalidArgument,
  kInvalidConfig,
  kFrameOutOfRange,
  kSingularInnovation,
  kInsufficientMatches,
  kDegenerateConfiguration,
  kNoValidPair,
  kCheiralityFailure,
  kNegativeDepth,
  kIllConditioned,
  kReconstructionTooSparse,
  kMissingPose,
  kEmptyInput,
  kEmptyProfile,
  kNoOverlappingFrames,
  kLengthMismatch,
  kDegenerateInput,
  kParseError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All recoverable failures in the library are reported through this type. The
// code is stable and is what callers (and the CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const { return code_; }
  // what() without the code name.
  const std::string& message() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace orchard
