#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace typegan {

enum class ErrorKind {
  FileNotFound,
  UnparsableFont,
  MissingGlyph,
  IoError,
  InsufficientCorpus,
  EmptyManifest,
  ShapeMismatch,
  ShapeTooSmall,
  UnknownStyleIndex,
  NonFiniteInput,
  NonFiniteLoss,
  ConfigMismatch,
  MissingGroundTruth,
  UnknownLayer,
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code used by the CLI for each error kind:
/// 2 validation, 3 input/IO, 4 numerical failure.
int exit_code_for(ErrorKind kind);

/// Every failure raised by the library. what() is "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace typegan
