#pragma once

#include <stdexcept>
#include <string>

namespace rahtpc {

enum class ErrorKind {
  Parse,
  Range,
  Shape,
  Parameter,
  EmptyInput,
  Conditioning,
  Prediction,
  Io,
  Decode,
  Geometry,
  Data,
  Training,
  Usage,
};

// Single exception type for the library; `kind()` tells callers (and the CLI
// exit-code mapping) which contract was violated.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Conditioning: return "conditioning error";
    case ErrorKind::Prediction: return "prediction error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Decode: return "decode error";
    case ErrorKind::Geometry: return "geometry error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

}  // namespace rahtpc
