#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fashion {

enum class ErrorCode {
  NonSimplex,
  NegativeEntry,
  ShapeMismatch,
  TooSmall,
  EmptySkinRegion,
  LengthMismatch,
  EmptyCaption,
  DatasetEmpty,
  NonFiniteLoss,
  MissingCheckpoint,
  StageMismatch,
  MissingSegmentation,
  CaptionMissing,
  PaletteViolation,
  PriorShapeMismatch,
  NonOneHot,
  TooFewIds,
  NoPositives,
  InvalidPermutation,
  InvalidArgument,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (CLI, service, bindings) can map it to an exit code or status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fashion
