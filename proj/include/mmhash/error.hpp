#pragma once

#include <stdexcept>
#include <string>

namespace mmhash {

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  IndexOutOfRange,
  NonConvergence,
  NumericalFailure,
  Infeasible,
  Parse,
  Io,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this one exception type; the
// code lets callers (and the CLI) branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmhash
