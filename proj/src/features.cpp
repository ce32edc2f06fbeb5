#include "geoscene/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geoscene {

namespace {

double tile_lon(int zoom, double x) { return x / std::ldexp(1.0, zoom) * 360.0 - 180.0; }

double tile_lat(int zoom, double y) {
  const double n = std::numbers::pi * (1.0 - 2.0 * y / std::ldexp(1.0, zoom));
  return std::atan(std::sinh(n)) * 180.0 / std::numbers::pi;
}

int lon_to_tile(int zoom, double lon) {
  const int n = 1 << zoom;
  return std::clamp(static_cast<int>(std::floor((lon + 180.0) / 360.0 * n)), 0, n - 1);
}

int lat_to_tile(int zoom, double lat) {
  const int n = 1 << zoom;
  const double phi = lat * std::numbers::pi / 180.0;
  const double y = (1.0 - std::asinh(std::tan(phi)) / std::numbers::pi) / 2.0 * n;
  return std::clamp(static_cast<int>(std::floor(y)), 0, n - 1);
}

}  // namespace

void TileAddress::validate() const {
  if (zoom < 0 || zoom > 30) throw Error(ErrorCode::InvalidArgument, "tile zoom out of range");
  const long long n = 1LL << zoom;
  if (x < 0 || y < 0 || x >= n || y >= n) {
    throw Error(ErrorCode::InvalidArgument, "tile index out of range: " + path());
  }
}

std::string TileAddress::path() const {
  return std::to_string(zoom) + "/" + std::to_string(x) + "/" + std::to_string(y);
}

GeoBox tile_geo_bounds(const TileAddress& addr) {
  addr.validate();
  return {tile_lat(addr.zoom, addr.y + 1.0), tile_lon(addr.zoom, addr.x),
          tile_lat(addr.zoom, addr.y), tile_lon(addr.zoom, addr.x + 1.0)};
}

geom::Rect scene_rect(const GeoBox& box, const geom::GeoPoint& origin) {
  return geom::Rect(geom::project_unchecked(box.min_corner(), origin),
                    geom::project_unchecked(box.max_corner(), origin));
}

geom::Rect tile_scene_bounds(const TileAddress& addr, const geom::GeoPoint& origin) {
  return scene_rect(tile_geo_bounds(addr), origin);
}

std::vector<TileAddress> tiles_covering(const GeoBox& box, int zoom, const std::string& layer) {
  std::vector<TileAddress> out;
  const int x0 = lon_to_tile(zoom, box.min_lon);
  const int x1 = lon_to_tile(zoom, box.max_lon);
  const int y0 = lat_to_tile(zoom, box.max_lat);
  const int y1 = lat_to_tile(zoom, box.min_lat);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) out.push_back({zoom, x, y, layer});
  }
  return out;
}

}  // namespace geoscene
