#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tfv {

enum class ErrorCode {
  MissingFile,
  MalformedManifest,
  ShapeMismatch,
  NonFiniteEmbedding,
  DuplicateCase,
  InvalidRange,
  BadMagic,
  TruncatedPayload,
  UnsupportedVersion,
  TooFewFrames,
  MissingFrameCoordinate,
  DuplicateRow,
  UnknownCase,
  UnknownChannel,
  InvalidArgument,
  TrajectoryTooShort,
  EmptySet,
  CaseSetMismatch,
  UnknownCluster,
  EmptyText,
  NoAnnotatedCentroids,
  VlmUnavailable,
  VlmMalformedResponse,
  NotFound,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code; the HTTP layer maps codes to
/// status values and the CLI prints `code: message`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tfv
