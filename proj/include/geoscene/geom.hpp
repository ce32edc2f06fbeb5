#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "geoscene/error.hpp"

namespace geoscene::geom {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Scene-local metres: x easting, y northing, origin at the generation bbox min corner.
using Point2D = Point2<double>;
using Point3D = Eigen::Vector3d;
using Rect = Eigen::AlignedBox2d;
using Ring = std::vector<Point2D>;
using Triangle = std::array<std::uint32_t, 3>;

/// Land-cover class code; 0 is water.
using ClassCode = std::uint8_t;

// -- scalar-generic primitives ---------------------------------------------

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
template <typename Scalar>
inline Scalar orient2d(const Point2<Scalar>& a, const Point2<Scalar>& b,
                       const Point2<Scalar>& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// Shoelace area; positive for counter-clockwise rings.
template <typename Scalar>
Scalar signed_area(std::span<const Point2<Scalar>> ring) {
  Scalar sum{0};
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n == 0 ? 0 : n - 1; i < n; j = i++) {
    sum += (ring[j].x() - ring[i].x()) * (ring[i].y() + ring[j].y());
  }
  return sum / Scalar{2};
}

template <typename Scalar>
Scalar triangle_area(const Point2<Scalar>& a, const Point2<Scalar>& b,
                     const Point2<Scalar>& c) {
  return orient2d(a, b, c) / Scalar{2};
}

/// Even-odd crossing test with the half-open convention: points on left and
/// bottom edges are inside, points on right and top edges are outside.
template <typename Scalar>
bool point_in_ring(const Point2<Scalar>& p, std::span<const Point2<Scalar>> ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n == 0 ? 0 : n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const Scalar x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (x_cross > p.x()) inside = !inside;
    }
  }
  return inside;
}

/// Closest point on segment [a, b] to p, as the segment parameter in [0, 1].
template <typename Scalar>
Scalar project_to_segment(const Point2<Scalar>& p, const Point2<Scalar>& a,
                          const Point2<Scalar>& b) {
  const Point2<Scalar> d = b - a;
  const Scalar len2 = d.squaredNorm();
  if (len2 <= Scalar{0}) return Scalar{0};
  return std::clamp((p - a).dot(d) / len2, Scalar{0}, Scalar{1});
}

inline double signed_area(const Ring& ring) {
  return signed_area<double>(std::span<const Point2D>(ring));
}
inline bool point_in_ring(const Point2D& p, const Ring& ring) {
  return point_in_ring<double>(p, std::span<const Point2D>(ring));
}

// -- polygons --------------------------------------------------------------

/// Planar region with one outer ring and zero or more holes. Orientation is
/// normalized on construction: outer counter-clockwise, holes clockwise.
/// Topology (simplicity, hole containment) is checked by `validate`.
class PolygonWithHoles {
 public:
  PolygonWithHoles() = default;
  explicit PolygonWithHoles(Ring outer, std::vector<Ring> holes = {}, ClassCode class_code = 0);

  const Ring& outer() const { return outer_; }
  const std::vector<Ring>& holes() const { return holes_; }
  ClassCode class_code() const { return class_code_; }
  void set_class_code(ClassCode code) { class_code_ = code; }

  std::size_t vertex_count() const;
  /// Outer area minus hole areas.
  double area() const;
  Rect bounds() const;

 private:
  Ring outer_;
  std::vector<Ring> holes_;
  ClassCode class_code_ = 0;
};

/// Drops the explicit closing vertex and consecutive duplicates.
Ring clean_ring(Ring ring);

/// Throws DegeneratePolygon for rings with < 3 vertices, zero area, or
/// self-intersections; InvalidTopology when a hole is not strictly inside the
/// outer ring or two holes overlap.
void validate(const PolygonWithHoles& poly);

bool ring_is_simple(const Ring& ring);

/// Proper or touching intersection of closed segments [a, b] and [c, d].
bool segments_intersect(const Point2D& a, const Point2D& b, const Point2D& c, const Point2D& d);

// -- triangulation ---------------------------------------------------------

struct TriangleMesh2D {
  std::vector<Point2D> vertices;
  std::vector<Triangle> triangles;

  double area() const;
};

/// Ear-clipping triangulation of a polygon with holes. Holes are bridged into
/// the outer ring, so a generic input yields
/// (outer + hole vertices + 2 * holes - 2) triangles, all counter-clockwise.
/// Vertices of the output are the polygon's vertices (outer first, then holes
/// in order).
TriangleMesh2D earcut_triangulate(const PolygonWithHoles& poly);

/// True iff p is inside the outer ring and outside every hole (half-open edges).
bool point_in_polygon(const Point2D& p, const PolygonWithHoles& poly);

// -- clipping --------------------------------------------------------------

/// Intersection of `poly` with the axis-aligned rectangle. Rings are clipped
/// against the rectangle individually and the pieces re-assembled by walking
/// the rectangle boundary, so a concave input may yield several polygons.
/// Holes touching the rectangle boundary become notches in the outer rings.
std::vector<PolygonWithHoles> clip_polygon_to_rect(const PolygonWithHoles& poly, const Rect& rect);

// -- projection ------------------------------------------------------------

struct GeoPoint {
  double lat = 0.0;  ///< degrees WGS84
  double lon = 0.0;  ///< degrees WGS84

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr double kEarthRadius = 6371000.0;
inline constexpr double kMaxRegionExtent = 100000.0;

/// Local equirectangular tangent plane at `origin`:
/// x = R cos(lat0) dlon, y = R dlat. Throws OutOfRegion beyond 100 km.
Point2D project_to_scene(const GeoPoint& g, const GeoPoint& origin);
/// Same formula without the region check (tile footprints, bounding boxes).
Point2D project_unchecked(const GeoPoint& g, const GeoPoint& origin);
GeoPoint unproject_from_scene(const Point2D& p, const GeoPoint& origin);

/// Pluggable CRS transform; the default is the local tangent plane above.
class Projection {
 public:
  virtual ~Projection() = default;
  virtual Point2D forward(const GeoPoint& g) const = 0;
  virtual GeoPoint inverse(const Point2D& p) const = 0;
};

class LocalTangentProjection final : public Projection {
 public:
  explicit LocalTangentProjection(GeoPoint origin) : origin_(origin) {}
  Point2D forward(const GeoPoint& g) const override { return project_to_scene(g, origin_); }
  GeoPoint inverse(const Point2D& p) const override { return unproject_from_scene(p, origin_); }
  const GeoPoint& origin() const { return origin_; }

 private:
  GeoPoint origin_;
};

}  // namespace geoscene::geom
