#pragma once

#include <stdexcept>
#include <string>

namespace tbss {

enum class ErrorKind {
  Io,                 // file cannot be opened, read or written
  Format,             // bad magic, payload kind, reserved bytes or JSON shape
  Truncated,          // payload shorter than the header promises
  TrailingData,       // payload longer than the header promises
  OutOfRange,         // value violates the type invariant
  DimensionMismatch,  // operands disagree on shape
  InvalidArgument,    // parameter validation
  Degenerate,         // input carries no information for the operation
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::TrailingData: return "trailing-data";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tbss
