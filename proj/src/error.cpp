#include "geoscene/error.hpp"

namespace geoscene {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::OutOfRegion: return "OutOfRegion";
    case ErrorCode::SourceUnavailable: return "SourceUnavailable";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::FixtureMissing: return "FixtureMissing";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoDataAt: return "NoDataAt";
    case ErrorCode::AllNoData: return "AllNoData";
    case ErrorCode::NoValidShoreSamples: return "NoValidShoreSamples";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MalformedTable: return "MalformedTable";
    case ErrorCode::MissingBatchId: return "MissingBatchId";
    case ErrorCode::InconsistentBatch: return "InconsistentBatch";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::InconsistentTiling: return "InconsistentTiling";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::SerializationError: return "SerializationError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidRoute: return "InvalidRoute";
    case ErrorCode::RouteUnknown: return "RouteUnknown";
    case ErrorCode::FixTooFar: return "FixTooFar";
    case ErrorCode::StaleFix: return "StaleFix";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace geoscene
