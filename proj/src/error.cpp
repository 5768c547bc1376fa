#include "timesliver/error.hpp"

namespace timesliver {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::NumericFailure: return "numeric-failure";
    case ErrorKind::CorruptHeader: return "corrupt-header";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::UnknownVersion: return "unknown-version";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace timesliver
