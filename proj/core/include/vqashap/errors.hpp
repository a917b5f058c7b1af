#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vqashap {

enum class ErrorCode {
  kInvalidArgument,
  kValidation,
  kCapExceeded,
  kShapeMismatch,
  kRewardFailure,
  kNonFiniteReward,
  kProtocol,
  kVersionMismatch,
  kTimeout,
  kUnknownTuple,
  kPoolExhausted,
  kLabelOverflow,
  kMissingAttributions,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vqashap
