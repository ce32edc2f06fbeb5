#pragma once

#include <map>
#include <string>
#include <vector>

#include "geoscene/geom.hpp"

namespace geoscene {

/// Geographic bounding box in WGS84 degrees.
struct GeoBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  geom::GeoPoint min_corner() const { return {min_lat, min_lon}; }
  geom::GeoPoint max_corner() const { return {max_lat, max_lon}; }
  bool valid() const { return max_lat > min_lat && max_lon > min_lon; }
};

/// Slippy-map tile address (Web Mercator, y counted from the north).
struct TileAddress {
  int zoom = 0;
  int x = 0;
  int y = 0;
  std::string layer;

  /// Throws InvalidArgument unless zoom >= 0 and 0 <= x, y < 2^zoom.
  void validate() const;
  std::string path() const;  ///< "<zoom>/<x>/<y>"

  friend auto operator<=>(const TileAddress&, const TileAddress&) = default;
};

GeoBox tile_geo_bounds(const TileAddress& addr);

/// Tile footprint in scene coordinates. Adjacent tiles share their boundary
/// coordinates exactly.
geom::Rect tile_scene_bounds(const TileAddress& addr, const geom::GeoPoint& origin);

/// All tiles at `zoom` intersecting the box, row-major from the north-west.
std::vector<TileAddress> tiles_covering(const GeoBox& box, int zoom, const std::string& layer);

/// Scene-space rectangle of a geographic box.
geom::Rect scene_rect(const GeoBox& box, const geom::GeoPoint& origin);

struct Feature {
  geom::PolygonWithHoles polygon;
  std::map<std::string, std::string> attributes;
};

struct FeatureCollection {
  std::vector<Feature> features;
  geom::Rect bounds;
  /// Features dropped because their geometry failed validation.
  std::size_t dropped = 0;
};

}  // namespace geoscene
