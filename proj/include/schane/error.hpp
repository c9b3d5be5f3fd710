// Error taxonomy shared by every module. Each failure carries a kind so the
// CLI can map it onto a stable exit code.
#pragma once

#include <stdexcept>
#include <string>

namespace schane {

enum class ErrorKind {
  // numerics
  DegenerateVector,
  EmptyInput,
  ShapeError,
  NumericError,
  DegenerateInput,
  // data
  FormatError,
  CountMismatch,
  EmptyDataset,
  InsufficientSamples,
  InsufficientClasses,
  // objectives
  NoNegatives,
  NoPositives,
  ViewPairingError,
  InsufficientBatch,
  LabelError,
  // framework / cli
  CacheMismatch,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DegenerateVector: return "DegenerateVector";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NumericError: return "NumericError";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::InsufficientClasses: return "InsufficientClasses";
    case ErrorKind::NoNegatives: return "NoNegatives";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::ViewPairingError: return "ViewPairingError";
    case ErrorKind::InsufficientBatch: return "InsufficientBatch";
    case ErrorKind::LabelError: return "LabelError";
    case ErrorKind::CacheMismatch: return "CacheMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Process exit codes: 2 config, 3 data, 4 numeric.
  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::ConfigError:
        return 2;
      case ErrorKind::FormatError:
      case ErrorKind::CountMismatch:
      case ErrorKind::EmptyDataset:
      case ErrorKind::InsufficientSamples:
      case ErrorKind::InsufficientClasses:
      case ErrorKind::IoError:
        return 3;
      default:
        return 4;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace schane
