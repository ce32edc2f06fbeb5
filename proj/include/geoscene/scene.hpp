#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "geoscene/buildings.hpp"
#include "geoscene/geom.hpp"
#include "geoscene/hydro.hpp"
#include "geoscene/terrain.hpp"
#include "geoscene/vegetation.hpp"

namespace geoscene::scene {

using geom::Point2D;
using geom::Point3D;

enum class ObjectKind { Terrain, Water, Building, Tree, VehicleTrack };
std::string_view to_string(ObjectKind kind);

/// Translation, rotation about +Z, uniform scale.
struct Transform {
  Point3D translation = Point3D::Zero();
  double yaw = 0.0;  ///< radians
  double scale = 1.0;

  bool identity() const { return translation.isZero(0.0) && yaw == 0.0 && scale == 1.0; }
};

struct MeshData {
  std::string name;
  std::vector<Point3D> vertices;
  std::vector<geom::Triangle> triangles;
  std::vector<Eigen::Vector2d> uvs;  ///< empty or one per vertex
  std::vector<float> classes;        ///< empty or one land-cover code per vertex
  /// Polyline mesh (vertex order is the line) instead of triangles.
  bool line_strip = false;
};

struct SceneObject {
  std::string id;
  ObjectKind kind = ObjectKind::Terrain;
  int mesh = -1;  ///< index into SceneGraph::meshes, shared by tree instances
  Transform transform;
  std::string source_id;
  std::optional<int> class_code;
  std::map<std::string, std::string> metadata;
};

struct SceneCounters {
  std::size_t dropped_empty = 0;          ///< inputs without geometry
  std::size_t dropped_out_of_bounds = 0;  ///< footprint outside bounds + 1 cm
  std::size_t id_collisions = 0;          ///< ids that needed a suffix
};

struct SceneGraph {
  std::vector<SceneObject> objects;
  std::vector<MeshData> meshes;
  geom::Rect bounds;
  geom::GeoPoint origin;
  std::uint64_t seed = 0;
  SceneCounters counters;

  std::size_t count(ObjectKind kind) const;
};

template <class T>
struct Layer {
  geom::GeoPoint origin;  ///< frame the items are expressed in
  T items{};
};

struct Track {
  std::string route_id;
  std::string destination;
  std::vector<Point3D> points;
};

struct SceneInputs {
  geom::GeoPoint origin;
  geom::Rect bounds;
  std::uint64_t seed = 0;
  std::optional<Layer<terrain::TerrainMesh>> terrain;
  Layer<std::vector<hydro::WaterMesh>> water;
  Layer<std::vector<buildings::BuildingMesh>> buildings;
  Layer<std::vector<vegetation::TreeInstance>> trees;
  Layer<std::vector<Track>> tracks;
};

/// Footprints may leave `bounds` by this much before the object is dropped.
inline constexpr double kBoundsEpsilon = 0.01;

/// One object per input entity. Ids: "terrain", "water/<body>",
/// "building/<id>", "tree/<content hash>", "track/<route>"; a repeated id gets
/// "~2", "~3", ... in input order and is counted. Throws FrameMismatch when a
/// non-empty layer was produced for a different origin.
SceneGraph assemble(const SceneInputs& inputs);

/// Shared low-poly tree model for a "tree_<size>_<variant>" key: crown radius
/// 1 at unit scale, base at z = 0.
MeshData tree_model(const std::string& model_key);

/// Binary glTF: a root node rotating Z-up to Y-up holds one child node per
/// object in scene order. Node extras carry kind, source_id, class_code and
/// metadata; tree nodes reference one mesh per model key. Deterministic.
std::string export_glb(const SceneGraph& scene);

/// Stable-order JSON text: origin, bounds, seed, convention, per-kind counts,
/// counters, then `parameters` verbatim.
std::string export_manifest(const SceneGraph& scene,
                            const nlohmann::ordered_json& parameters = nlohmann::ordered_json::object());

struct NodeRecord {
  std::string id;
  std::string kind;
  std::string source_id;
  nlohmann::json class_code;
  int mesh = -1;
  std::size_t vertex_count = 0;
  std::size_t triangle_count = 0;
};

/// Parses an export_glb file back into per-object records (root excluded).
std::vector<NodeRecord> read_back(std::string_view glb_bytes);

}  // namespace geoscene::scene
