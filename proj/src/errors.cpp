#include "typegan/errors.hpp"

namespace typegan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::UnparsableFont: return "UnparsableFont";
    case ErrorKind::MissingGlyph: return "MissingGlyph";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InsufficientCorpus: return "InsufficientCorpus";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ShapeTooSmall: return "ShapeTooSmall";
    case ErrorKind::UnknownStyleIndex: return "UnknownStyleIndex";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorKind::UnknownLayer: return "UnknownLayer";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound:
    case ErrorKind::UnparsableFont:
    case ErrorKind::MissingGlyph:
    case ErrorKind::IoError:
      return 3;
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::NonFiniteInput:
      return 4;
    default:
      return 2;
  }
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(detail) {}

}  // namespace typegan
