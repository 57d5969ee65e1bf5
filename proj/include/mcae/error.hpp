#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcae {

enum class ErrorCode {
  // data errors
  EmptyMask,
  InvalidRle,
  TileOutOfRange,
  OutOfBounds,
  DimMismatch,
  DuplicateId,
  NonFiniteFeature,
  NotUnitNorm,
  MissingFeature,
  UnknownCluster,
  UnknownMask,
  NotAMember,
  InvalidClass,
  InvalidArgument,
  Io,
  Parse,
  // configuration errors
  Config,
  // internal invariant violations
  Invariant,
};

std::string_view to_string(ErrorCode code);

/// Process exit code category for an error: 2 config, 3 data, 4 invariant.
int exit_code_for(ErrorCode code);

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

}  // namespace mcae
