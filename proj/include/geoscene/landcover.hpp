#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geoscene/features.hpp"
#include "geoscene/geom.hpp"
#include "geoscene/raster.hpp"

namespace geoscene::landcover {

using geom::ClassCode;

inline constexpr ClassCode kWater = 0;
inline constexpr ClassCode kUnknown = 255;

/// Overlap priority group; earlier groups win.
enum class Category { Water = 0, Infrastructure = 1, Vegetation = 2, Generic = 3 };

struct LandCoverClass {
  ClassCode code = 0;
  std::string name;
  std::string texture_key;
  Category category = Category::Generic;
};

/// Code → class lookup plus overlap priority. Text form: one
/// "code name texture_key [category]" entry per line, '#' starts a comment.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<LandCoverClass> entries);

  /// water, grass, cycle_lane, road, ... as used by the bundled fixtures.
  static ClassTable defaults();
  static ClassTable parse(std::string_view text);
  std::string to_text() const;

  const LandCoverClass* find(ClassCode code) const;
  const LandCoverClass* find(std::string_view name) const;
  const std::vector<LandCoverClass>& entries() const { return entries_; }

  /// Sort key for overlaps: lower wins (category, then lowest code).
  int priority(ClassCode code) const;

 private:
  std::vector<LandCoverClass> entries_;
};

/// N x N class raster ("control texture"). Row 0 is the southern edge.
class LandCoverRaster {
 public:
  LandCoverRaster() = default;
  LandCoverRaster(int n, const geom::Rect& bounds, ClassCode fill = kUnknown);

  int size() const { return n_; }
  const geom::Rect& bounds() const { return bounds_; }
  geom::Point2D cell_size() const { return bounds_.sizes() / n_; }
  geom::Point2D cell_center(int row, int col) const;

  ClassCode at(int row, int col) const { return cells_[static_cast<std::size_t>(row) * n_ + col]; }
  ClassCode& at(int row, int col) { return cells_[static_cast<std::size_t>(row) * n_ + col]; }
  const std::vector<ClassCode>& cells() const { return cells_; }

 private:
  int n_ = 0;
  geom::Rect bounds_;
  std::vector<ClassCode> cells_;
};

/// Samples every cell centre against the triangulated features. A cell takes
/// the class of the highest-priority feature containing its centre (ties:
/// lowest code); uncovered cells are kUnknown. Boundary decisions follow the
/// half-open point-in-polygon convention.
LandCoverRaster rasterize_classes(const FeatureCollection& fc, int n, const geom::Rect& bounds,
                                  const ClassTable& table = ClassTable::defaults());

/// Cell lookup with half-open cells; points on the max edges map to the last
/// row/column. Throws OutOfBounds outside the raster bounds.
ClassCode class_at(const LandCoverRaster& raster, const geom::Point2D& p);

/// 8-bit PGM debug dump, north up.
std::string to_pgm(const LandCoverRaster& raster);

}  // namespace geoscene::landcover
