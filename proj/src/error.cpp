#include "tfv/error.hpp"

namespace tfv {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteEmbedding: return "NonFiniteEmbedding";
    case ErrorCode::DuplicateCase: return "DuplicateCase";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::MissingFrameCoordinate: return "MissingFrameCoordinate";
    case ErrorCode::DuplicateRow: return "DuplicateRow";
    case ErrorCode::UnknownCase: return "UnknownCase";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TrajectoryTooShort: return "TrajectoryTooShort";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::CaseSetMismatch: return "CaseSetMismatch";
    case ErrorCode::UnknownCluster: return "UnknownCluster";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::NoAnnotatedCentroids: return "NoAnnotatedCentroids";
    case ErrorCode::VlmUnavailable: return "VlmUnavailable";
    case ErrorCode::VlmMalformedResponse: return "VlmMalformedResponse";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace tfv
