#include <cmath>
#include <numbers>
#include <string>

#include "geoscene/geom.hpp"

namespace geoscene::geom {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_geo(const GeoPoint& g) {
  if (!(g.lat >= -90.0 && g.lat <= 90.0 && g.lon >= -180.0 && g.lon <= 180.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "geographic point out of range (" + std::to_string(g.lat) + ", " +
                    std::to_string(g.lon) + ")");
  }
}

}  // namespace

Point2D project_unchecked(const GeoPoint& g, const GeoPoint& origin) {
  const double x = kEarthRadius * std::cos(origin.lat * kDegToRad) * (g.lon - origin.lon) * kDegToRad;
  const double y = kEarthRadius * (g.lat - origin.lat) * kDegToRad;
  return {x, y};
}

Point2D project_to_scene(const GeoPoint& g, const GeoPoint& origin) {
  check_geo(g);
  check_geo(origin);
  const Point2D p = project_unchecked(g, origin);
  const double x = p.x();
  const double y = p.y();
  if (std::hypot(x, y) > kMaxRegionExtent) {
    throw Error(ErrorCode::OutOfRegion, "point is more than 100 km from the scene origin");
  }
  return {x, y};
}

GeoPoint unproject_from_scene(const Point2D& p, const GeoPoint& origin) {
  const double lat = origin.lat + p.y() / kEarthRadius / kDegToRad;
  const double lon = origin.lon + p.x() / (kEarthRadius * std::cos(origin.lat * kDegToRad)) / kDegToRad;
  return {lat, lon};
}

}  // namespace geoscene::geom
