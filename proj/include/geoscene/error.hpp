#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoscene {

enum class ErrorCode {
  // geom
  DegeneratePolygon,
  InvalidTopology,
  OutOfRegion,
  // ingest
  SourceUnavailable,
  DecodeError,
  FixtureMissing,
  // landcover / terrain
  OutOfBounds,
  NoDataAt,
  AllNoData,
  // hydro
  NoValidShoreSamples,
  // buildings
  BadMagic,
  UnsupportedVersion,
  LengthMismatch,
  MalformedTable,
  MissingBatchId,
  InconsistentBatch,
  DegenerateFace,
  UnsupportedFeature,
  // vegetation
  InconsistentTiling,
  // scene
  FrameMismatch,
  SerializationError,
  // transit
  ParseError,
  InvalidRoute,
  RouteUnknown,
  FixTooFar,
  StaleFix,
  EmptyBuffer,
  // cli / config
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an Error; `code()`
/// identifies the contract violation, `what()` carries context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geoscene
