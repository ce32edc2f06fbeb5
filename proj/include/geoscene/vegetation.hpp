#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoscene/features.hpp"
#include "geoscene/geom.hpp"
#include "geoscene/landcover.hpp"
#include "geoscene/raster.hpp"
#include "geoscene/terrain.hpp"

namespace geoscene::vegetation {

using geom::Point2D;

/// Tree-crown raster tile: 8-bit size values, 0 = background. Row 0 is the
/// northern edge.
struct CrownRaster {
  TileAddress addr;
  GrayImage pixels;
  geom::Rect bounds;

  double pixel_width() const { return bounds.sizes().x() / pixels.width; }
  double pixel_height() const { return bounds.sizes().y() / pixels.height; }
  Point2D pixel_center(int row, int col) const {
    return {bounds.min().x() + (col + 0.5) * pixel_width(),
            bounds.max().y() - (row + 0.5) * pixel_height()};
  }
};

enum class SizeClass { Small, Medium, Large };
const char* to_string(SizeClass s);

/// Mean pixel value -> size class: <= small_max small, <= medium_max medium,
/// else large.
struct SizeTable {
  int small_max = 85;
  int medium_max = 170;
  SizeClass classify(double mean_value) const;
};

struct CrownParams {
  int min_pixels = 3;
  SizeTable sizes;
};

struct TreeInstance {
  Point2D position = Point2D::Zero();
  std::optional<double> elevation;  ///< set by place_trees
  SizeClass size_class = SizeClass::Small;
  double crown_radius = 0.0;
  std::size_t pixel_count = 0;
  double mean_value = 0.0;
  std::string model_key;
  std::optional<std::string> species;
  TileAddress tile;  ///< tile the crown was detected in (first tile for merged crowns)
  int component = -1;  ///< component label within that tile
};

/// 8-connected labels of nonzero pixels, -1 for background. Labels are
/// assigned in row-major order of each component's first pixel.
std::vector<int> label_components(const GrayImage& img, int* count = nullptr);

/// One instance per component of at least min_pixels pixels, positioned at
/// the pixel-centre centroid, radius sqrt(area / pi).
std::vector<TreeInstance> detect_crowns(const CrownRaster& raster, const CrownParams& params = {});

/// Joins crowns split across tile edges (and corners). Boundary components of
/// neighbouring tiles are matched when their edge pixels touch under
/// 8-connectivity; matched groups are recomputed over the pixel union.
/// Instances of untouched components pass through unchanged. Throws
/// InconsistentTiling when neighbouring bounds or pixel rows do not line up.
std::vector<TreeInstance> merge_cross_tile(const std::map<TileAddress, std::vector<TreeInstance>>& per_tile,
                                           const std::map<TileAddress, CrownRaster>& rasters,
                                           const CrownParams& params = {});

struct Placement {
  std::vector<TreeInstance> trees;
  std::size_t dropped_on_water = 0;
};

/// Sets elevations from the height field and picks a model per size class
/// from (seed, position). Trees on water cells of `classes` are dropped.
Placement place_trees(std::vector<TreeInstance> instances, const terrain::HeightField& hf,
                      const landcover::LandCoverRaster& classes, std::uint64_t seed);

/// Delimited table "x y z size_class crown_radius model_key".
std::string to_table(const std::vector<TreeInstance>& trees);

}  // namespace geoscene::vegetation
