#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "geoscene/geom.hpp"
#include "geoscene/landcover.hpp"

namespace geoscene::terrain {

using geom::Point2D;
using geom::Point3D;

inline constexpr double kDefaultNoData = -9999.0;

/// Uniform elevation grid. `origin` is the lower-left corner of the lower-left
/// cell; values(row, col) with row 0 at the south. Sample positions are cell
/// centres.
struct HeightField {
  int ncols = 0;
  int nrows = 0;
  Point2D origin = Point2D::Zero();
  double cell_size = 1.0;
  double nodata = kDefaultNoData;
  Eigen::MatrixXd values;

  HeightField() = default;
  HeightField(int ncols, int nrows, Point2D origin, double cell_size, double fill = 0.0,
              double nodata = kDefaultNoData);

  bool valid(int row, int col) const { return values(row, col) != nodata; }
  Point2D cell_center(int row, int col) const {
    return origin + Point2D(col + 0.5, row + 0.5) * cell_size;
  }
  geom::Rect extent() const {
    return {origin, origin + Point2D(ncols, nrows) * cell_size};
  }
  std::size_t nodata_count() const;
};

/// ESRI ASCII grid (ncols, nrows, xllcorner|xllcenter, yllcorner|yllcenter,
/// cellsize, NODATA_value). Rows in the text run north to south.
HeightField read_esri_ascii(std::string_view text);
std::string write_esri_ascii(const HeightField& hf);

struct FillResult {
  HeightField field;
  /// Nodata cells with no valid sample within the search radius.
  std::size_t unfilled = 0;
};

/// Inverse-distance (power 2) gap filling. The search disc grows one cell size
/// at a time until it holds at least `min_samples` valid cells or reaches
/// `max_radius`. Reads `hf`, writes a fresh field; valid cells pass through.
/// Throws AllNoData if `hf` has no valid cell.
FillResult fill_gaps(const HeightField& hf, double max_radius = 50.0, int min_samples = 4);

/// Bilinear interpolation between the four surrounding cell centres. Points in
/// the outer half cell use the edge values. Throws OutOfBounds outside the
/// extent and NoDataAt when a contributing cell is nodata.
double sample_height(const HeightField& hf, const Point2D& p);

/// Like sample_height but never throws: nodata weights are dropped and the
/// rest renormalized, points are clamped into the extent, `fallback` when
/// nothing valid contributes.
double sample_height_or(const HeightField& hf, const Point2D& p, double fallback = 0.0);

struct LodParams {
  Point3D viewpoint = Point3D::Zero();
  double base_cell = 1000.0;  ///< root cell size; the tile is covered by round(extent / base_cell) roots
  int max_depth = 8;
  double split_threshold = 0.5;  ///< split while node_size / distance exceeds this
};

struct LodNode {
  geom::Rect rect;
  int depth = 0;
  int parent = -1;
  std::array<int, 4> children{-1, -1, -1, -1};  ///< SW, SE, NW, NE
  /// Max vertical deviation between the heightfield and the node's surface,
  /// including all descendants.
  double error = 0.0;
  std::uint32_t first_triangle = 0;  ///< leaves only
  std::uint32_t triangle_count = 0;

  bool leaf() const { return children[0] < 0; }
};

struct TerrainMesh {
  std::vector<Point3D> vertices;
  std::vector<geom::Triangle> triangles;
  std::vector<geom::ClassCode> vertex_classes;
  std::vector<LodNode> nodes;  ///< quadtree, roots first
  int root_count = 0;
};

/// Viewpoint-driven restricted quadtree over the raster bounds. Neighbouring
/// leaves differ by at most one level; a leaf is emitted as two triangles
/// unless a finer neighbour adds an edge midpoint, in which case it becomes a
/// fan around its centre.
TerrainMesh build_lod_mesh(const HeightField& hf, const landcover::LandCoverRaster& raster,
                           const LodParams& params = {});

/// Wavefront OBJ text (debug inspection only).
std::string to_obj(const TerrainMesh& mesh);

}  // namespace geoscene::terrain
