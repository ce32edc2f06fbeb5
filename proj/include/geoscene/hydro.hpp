#pragma once

#include <string>
#include <vector>

#include "geoscene/features.hpp"
#include "geoscene/geom.hpp"
#include "geoscene/landcover.hpp"
#include "geoscene/terrain.hpp"

namespace geoscene::hydro {

using geom::Point2D;
using geom::Point3D;

struct ShoreSample {
  Point2D position;
  double elevation = 0.0;
};

struct WaterParams {
  double shore_offset = 2.0;  ///< metres outward from the outer ring
  double percentile = 10.0;
};

struct WaterBody {
  int id = 0;
  geom::PolygonWithHoles region;
  double surface_elevation = 0.0;
  std::vector<ShoreSample> shore_samples;
  std::string source_id;
};

struct WaterMesh {
  int body_id = 0;
  std::vector<Point3D> vertices;
  std::vector<geom::Triangle> triangles;

  double area() const;
  bool empty() const { return triangles.empty(); }
};

/// Terrain is never left more than this below a water surface at the shore.
inline constexpr double kShoreDrop = 0.01;

/// Water-class (code 0) polygons of the collection, validated, holes kept.
std::vector<geom::PolygonWithHoles> extract_water_polygons(const FeatureCollection& fc);

/// Nearest-rank percentile: element ceil(p/100 * n) - 1 of the sorted values.
double percentile(std::vector<double> values, double p);

/// Outer-ring vertices and edge midpoints pushed `offset` outward along the
/// ring normal (vertex normals bisect the adjacent edges).
std::vector<Point2D> shore_points(const geom::PolygonWithHoles& body, double offset);

/// Percentile of the valid height samples at the shore points. Throws
/// NoValidShoreSamples when none fall on valid terrain.
double estimate_water_level(const geom::PolygonWithHoles& body, const terrain::HeightField& hf,
                            const WaterParams& params = {}, std::vector<ShoreSample>* samples = nullptr);

/// Region + level + audit samples in one step.
WaterBody make_water_body(int id, geom::PolygonWithHoles region, const terrain::HeightField& hf,
                          const WaterParams& params = {});

/// Clip to the tile, triangulate, lift to the surface. Empty when disjoint.
WaterMesh build_water_mesh(const WaterBody& body, const geom::Rect& tile);

/// 8-connected component of water cells, stored as disjoint rectangles
/// (column runs merged across rows).
struct CellRegion {
  std::size_t cell_count = 0;
  std::vector<geom::Rect> rects;
  geom::Rect bounds;
  double area() const;
};

/// Baseline method: components of code-0 cells, ordered by first cell in
/// row-major order (row 0 = south).
std::vector<CellRegion> aggregate_water_cells(const landcover::LandCoverRaster& raster);

/// Terrain height at p from the mesh triangle containing it. Throws
/// OutOfBounds when no triangle contains p.
double terrain_height_at(const terrain::TerrainMesh& mesh, const Point2D& p);

/// Raises terrain vertices that sit more than kShoreDrop below a water
/// surface: those within `reach` of the body boundary and those of every
/// triangle under a water-mesh vertex. Returns the number of vertices moved.
std::size_t snap_shore(terrain::TerrainMesh& mesh, const std::vector<WaterBody>& bodies,
                       const std::vector<WaterMesh>& meshes, double reach);

/// Audit table: header with level and parameters, then "x y z" per sample.
std::string audit_table(const WaterBody& body, const WaterParams& params = {});

}  // namespace geoscene::hydro
