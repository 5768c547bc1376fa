#pragma once

#include <stdexcept>
#include <string>

namespace timesliver {

enum class ErrorKind {
  InvalidConfig,
  ShapeMismatch,
  OutOfRange,
  NumericFailure,
  CorruptHeader,
  LengthMismatch,
  UnknownVersion,
  Parse,
  Validation,
  Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library. `kind()` lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace timesliver
