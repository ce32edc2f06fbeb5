#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Geometry>

#include "geoscene/geom.hpp"
#include "geoscene/raster.hpp"
#include "json.hpp"

namespace geoscene::buildings {

using geom::Point2D;
using geom::Point3D;

// -- tileset index --------------------------------------------------------------

struct TilesetNode {
  geom::Rect footprint;  ///< scene-frame xy extent of the bounding volume
  double min_z = 0.0;
  double max_z = 0.0;
  std::optional<std::string> content_uri;
  Eigen::Affine3d transform = Eigen::Affine3d::Identity();  ///< accumulated, content frame -> scene
  std::vector<int> children;
};

struct ContentRef {
  std::string uri;
  Eigen::Affine3d transform = Eigen::Affine3d::Identity();
  geom::Rect footprint;
};

struct TilesetIndex {
  std::vector<TilesetNode> nodes;  ///< nodes[0] is the root
  /// Contents selected for a query region, depth-first.
  std::vector<ContentRef> contents;
};

/// Frame used to place a tileset in the scene: box volumes and content
/// coordinates are local metres shifted by `offset`; region volumes are
/// geographic (radians) and projected around `scene_origin`.
struct TilesetFrame {
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  geom::GeoPoint scene_origin;
};

/// Parses a 3D-Tiles style tileset document. Throws DecodeError on a
/// malformed document or a child volume escaping its parent.
TilesetIndex parse_tileset(std::string_view json_text, const TilesetFrame& frame = {});

/// Contents of every node whose footprint overlaps `region` with positive
/// area, depth-first; subtrees of non-overlapping nodes are skipped.
std::vector<ContentRef> select_contents(const TilesetIndex& index, const geom::Rect& region);

// -- b3dm --------------------------------------------------------------------------

struct B3dmPayload {
  nlohmann::json feature_table = nlohmann::json::object();
  std::string feature_table_binary;
  nlohmann::json batch_table = nlohmann::json::object();
  std::string batch_table_binary;
  std::string glb;

  /// BATCH_LENGTH from the feature table.
  std::size_t batch_length() const;
};

/// Throws BadMagic, UnsupportedVersion, LengthMismatch, MalformedTable.
B3dmPayload parse_b3dm(std::string_view bytes);

/// Reference writer: JSON tables padded with spaces so every section starts
/// on an 8-byte boundary.
std::string write_b3dm(const B3dmPayload& payload);

/// Batch-table column as strings (numbers printed, binary columns decoded).
/// Throws MalformedTable when the column length differs from the batch count.
std::vector<std::string> batch_column(const B3dmPayload& payload, const std::string& name);

// -- building meshes -------------------------------------------------------------

struct BuildingMesh {
  std::string id;
  std::vector<Point3D> vertices;  ///< scene metres, Z up
  std::vector<geom::Triangle> triangles;
  std::vector<Eigen::Vector2d> uvs;
  std::vector<std::uint32_t> roof_faces;
  Rgb roof_color{128, 128, 128};
  std::map<std::string, std::string> attributes;
  std::string facade_texture;

  geom::Rect footprint() const;
};

struct SplitOptions {
  /// Batch-table column holding the building identifier; empty = batch index.
  std::string id_column = "id";
  /// Applied after the glTF Y-up to Z-up conversion and RTC_CENTER.
  Eigen::Affine3d transform = Eigen::Affine3d::Identity();
};

/// One mesh per distinct batch id. Every batched vertex ends up in exactly
/// one mesh. Throws MissingBatchId, InconsistentBatch, UnsupportedFeature
/// (draco, animations, non-triangle primitives).
std::vector<BuildingMesh> split_by_batch(const B3dmPayload& payload, const SplitOptions& options = {});

inline constexpr double kRoofAngleDeg = 15.0;

/// Planar texture frame of one face (set of coplanar triangles).
struct FacadeFrame {
  Eigen::Vector3d normal;
  Eigen::Vector3d horizontal;
  Eigen::Vector3d vertical;
  Eigen::Vector2d extent;  ///< metres
};

/// Per-face planar UVs. Coplanar triangles form one face; its vertices are
/// duplicated so faces do not share uvs. Walls use (horizontal, projected up)
/// axes; near-horizontal faces are flagged as roof and use world-horizontal
/// axes with u along the face's longest boundary edge (world x/y, possibly
/// swapped, for axis-aligned roofs). uv = in-plane offset from the face's
/// minimum corner * texel_density. Throws DegenerateFace.
BuildingMesh compute_uv(const BuildingMesh& mesh, double texel_density = 1.0,
                        std::vector<FacadeFrame>* frames = nullptr);

inline const Rgb kFallbackRoofColor{128, 128, 128};

/// Component-wise (lower) median of the aerial pixels whose centres fall in
/// any roof triangle's footprint; kFallbackRoofColor below 4 pixels.
BuildingMesh assign_roof_color(const BuildingMesh& mesh, const ColorRaster& aerial);

/// Deterministic pick from the facade texture library keyed by the
/// building's "use" and construction "year" attributes.
std::string pick_facade_texture(const BuildingMesh& mesh, std::uint64_t seed);

// -- reference writer -------------------------------------------------------------

struct BatchedBuilding {
  std::string id;
  std::vector<Point3D> vertices;  ///< Z-up, relative to rtc_center
  std::vector<geom::Triangle> triangles;
  std::map<std::string, std::string> attributes;
};

/// Builds a b3dm payload (glTF Y-up, _BATCHID per vertex, RTC_CENTER) from
/// Z-up building geometry. Used for fixtures and round-trip tests.
B3dmPayload make_b3dm(const std::vector<BatchedBuilding>& buildings, const Eigen::Vector3d& rtc_center);

/// Axis-aligned box building (walls + flat roof, no floor) with footprint
/// [x0, x1] x [y0, y1] and height h.
BatchedBuilding box_building(std::string id, double x0, double y0, double x1, double y1, double h);

}  // namespace geoscene::buildings
