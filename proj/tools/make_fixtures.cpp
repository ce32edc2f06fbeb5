// Writes the bundled offline fixtures: fixtures/region (about 1 km2 with
// water, buildings, trees and a transit feed) and fixtures/empty.
//
// Ground truth comes from what this program draws, not from running the
// pipeline: every crown is a disc kept clear of water, buildings and other
// discs, so its expected fate (kept, dropped on water, outside the bbox) is
// known when it is placed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoscene/buildings.hpp"
#include "geoscene/features.hpp"
#include "geoscene/geom.hpp"
#include "geoscene/ingest.hpp"
#include "geoscene/raster.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace geoscene;
using geom::Point2D;

namespace {

constexpr double kSide = 1000.0;  // region edge, metres
constexpr double kElevTile = 500.0, kElevCell = 4.0;
constexpr double kAerialTile = 1000.0;
constexpr int kAerialPixels = 250;
constexpr int kTreePixels = 256;
const geom::GeoPoint kDatasetOrigin{51.835, 5.852};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

/// Parse-back of the printed bbox so the generator works in exactly the frame
/// the pipeline will rebuild from config.json.
GeoBox printed_bbox(const geom::GeoPoint& sw, double side) {
  const auto ne = geom::unproject_from_scene(Point2D(side, side), sw);
  return {std::stod(fmt("%.10f", sw.lat)), std::stod(fmt("%.10f", sw.lon)), std::stod(fmt("%.10f", ne.lat)),
          std::stod(fmt("%.10f", ne.lon))};
}

double dist_to_ring(const Point2D& p, const geom::Ring& r) {
  double best = 1e300;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point2D a = r[i], b = r[(i + 1) % r.size()];
    const double t = std::clamp((p - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
    best = std::min(best, (p - (a + t * (b - a))).norm());
  }
  return best;
}

struct Region {
  std::string name;
  GeoBox bbox;
  geom::GeoPoint origin;
  geom::Rect bounds;
  Point2D offset;  // dataset frame -> scene frame
  fs::path dir;

  Point2D to_local(const Point2D& p) const { return p - offset; }
  Point2D to_scene(const Point2D& p) const { return p + offset; }
};

Region make_region(const std::string& name, const geom::GeoPoint& sw, double side, const fs::path& root) {
  Region r;
  r.name = name;
  r.bbox = printed_bbox(sw, side);
  r.origin = r.bbox.min_corner();
  r.bounds = scene_rect(r.bbox, r.origin);
  r.offset = geom::project_unchecked(kDatasetOrigin, r.origin);
  r.dir = root / name;
  fs::remove_all(r.dir);
  fs::create_directories(r.dir);
  return r;
}

void put(const Region& r, const std::string& rel, const std::string& bytes) {
  const fs::path p = r.dir / rel;
  fs::create_directories(p.parent_path());
  ingest::write_file(p, bytes);
}

struct Range {
  long x0, x1, y0, y1;
};

/// Same tile range rule as the lattice loaders.
Range lattice(const Region& r, double ts) {
  const Point2D lo = r.to_local(r.bounds.min()), hi = r.to_local(r.bounds.max());
  auto first = [&](double v) { return static_cast<long>(std::floor(v / ts)); };
  auto last = [&](double v, long f) { return std::max(f, static_cast<long>(std::ceil(v / ts)) - 1); };
  const long x0 = first(lo.x()), y0 = first(lo.y());
  return {x0, last(hi.x(), x0), y0, last(hi.y(), y0)};
}

std::string lattice_name(double v) { return fmt("%.15g", v); }

// -- content of the populated region -------------------------------------------------------

struct Building {
  std::string id;
  double x0, y0, x1, y1, height;
  std::string use;
  int year;
  Rgb roof;
};

struct Crown {
  Point2D c;
  double radius;
  std::uint8_t value;
  enum Fate { Kept, OnWater, Outside } fate;
};

struct Scenery {
  std::vector<geom::PolygonWithHoles> water;
  std::vector<std::string> water_ids;
  std::vector<Building> buildings;
  std::vector<Crown> crowns;
  std::vector<Point2D> holes;  // elevation gaps, radius 8 m
};

geom::Ring blob(Point2D c, const std::vector<double>& radii, double phase) {
  geom::Ring ring;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double a = phase + 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(radii.size());
    ring.push_back(c + radii[i] * Point2D(std::cos(a), std::sin(a)));
  }
  return ring;
}

bool in_building(const Point2D& p, const Building& b, double margin = 0.0) {
  return p.x() >= b.x0 - margin && p.x() <= b.x1 + margin && p.y() >= b.y0 - margin && p.y() <= b.y1 + margin;
}

double terrain_z(const Point2D& p) {
  return 9.0 + 0.003 * p.x() + 0.002 * p.y() + 1.2 * std::sin(p.x() / 130.0) * std::cos(p.y() / 160.0);
}

Scenery make_scenery(const Region& region) {
  Scenery s;
  // Pond with an island; a slanted canal. Both stay narrow enough for the
  // 50 m gap filler to close the voids under them.
  s.water.emplace_back(blob({300, 650}, {46, 50, 44, 48, 42, 47, 50, 45, 43, 48}, 0.2),
                       std::vector<geom::Ring>{blob({305, 655}, {12, 13, 11, 12, 14, 12}, 0.0)});
  s.water.emplace_back(geom::Ring{{560, 200}, {710, 206}, {860, 215}, {858, 245}, {700, 238}, {558, 232}});
  s.water_ids = {"pond", "canal"};

  s.buildings = {
      {"b01", 100, 100, 130, 125, 12, "residential", 1932, {178, 64, 52}},
      {"b02", 180, 90, 205, 130, 9, "residential", 1968, {150, 90, 60}},
      {"b03", 320, 300, 360, 330, 18, "office", 2004, {90, 90, 100}},
      {"b04", 600, 80, 640, 110, 15, "retail", 1995, {200, 200, 190}},
      {"b05", 760, 320, 790, 360, 24, "office", 2012, {60, 60, 70}},
      {"b06", 90, 820, 125, 850, 10, "residential", 1925, {170, 70, 40}},
      {"b07", 160, 560, 190, 590, 8, "school", 1971, {120, 110, 100}},
      {"b08", 620, 700, 660, 735, 30, "office", 2018, {210, 215, 220}},
      {"b09", 800, 820, 830, 860, 14, "residential", 1988, {140, 50, 45}},
      {"b10", 700, 560, 735, 590, 11, "retail", 1979, {100, 120, 140}},
  };
  s.holes = {{400, 150}, {850, 600}, {150, 400}, {620, 900}, {520, 520}, {900, 100}};

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto value_for = [](double radius) -> std::uint8_t { return radius < 4.8 ? 60 : radius < 6.0 ? 130 : 210; };
  auto clear_of_others = [&](const Point2D& c, double r) {
    for (const auto& o : s.crowns) {
      if ((o.c - c).norm() < o.radius + r + 8.0) return false;
    }
    return true;
  };
  auto land_ok = [&](const Point2D& c, double r) {
    if (c.x() < 30 || c.y() < 30 || c.x() > kSide - 30 || c.y() > kSide - 30) return false;
    for (const auto& w : s.water) {
      if (geom::point_in_polygon(c, w) || dist_to_ring(c, w.outer()) < r + 10.0) return false;
    }
    for (const auto& b : s.buildings) {
      if (in_building(c, b, r + 5.0)) return false;
    }
    for (const auto& h : s.holes) {
      if ((h - c).norm() < r + 10.0) return false;
    }
    return clear_of_others(c, r);
  };

  // Tree tiles: crowns straddling their shared edges exercise the cross-tile merge.
  const auto tiles = tiles_covering(region.bbox, 16, "trees");
  std::vector<double> xs, ys;
  geom::Rect cover;
  for (const auto& t : tiles) {
    const auto b = tile_scene_bounds(t, region.origin);
    cover.extend(b);
    for (double x : {b.min().x(), b.max().x()}) {
      if (x > 60 && x < kSide - 60 && std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    }
    for (double y : {b.min().y(), b.max().y()}) {
      if (y > 60 && y < kSide - 60 && std::find(ys.begin(), ys.end(), y) == ys.end()) ys.push_back(y);
    }
  }
  auto try_place = [&](auto&& gen, int wanted) {
    for (int placed = 0, attempts = 0; placed < wanted && attempts < 20000; ++attempts) {
      const double r = 4.5 + 2.5 * u01(rng);
      const Point2D c = gen(r);
      if (land_ok(c, r)) {
        s.crowns.push_back({c, r, value_for(r), Crown::Kept});
        ++placed;
      }
    }
  };
  for (double x : xs) try_place([&](double) { return Point2D(x + (u01(rng) - 0.5), 40 + 920 * u01(rng)); }, 3);
  for (double y : ys) try_place([&](double) { return Point2D(40 + 920 * u01(rng), y + (u01(rng) - 0.5)); }, 3);
  for (double x : xs) {
    for (double y : ys) try_place([&](double) { return Point2D(x + (u01(rng) - 0.5), y + (u01(rng) - 0.5)); }, 1);
  }
  const int straddling = static_cast<int>(s.crowns.size());
  try_place([&](double) { return Point2D(40 + 920 * u01(rng), 40 + 920 * u01(rng)); }, 48 - straddling);

  // Two crowns on open water, two beyond the bbox but inside the tile cover.
  s.crowns.push_back({{272, 628}, 3.5, 60, Crown::OnWater});
  s.crowns.push_back({{700, 222}, 3.5, 60, Crown::OnWater});
  for (int placed = 0, attempts = 0; placed < 2 && attempts < 100000; ++attempts) {
    const Point2D c(cover.min().x() + 10 + (cover.sizes().x() - 20) * u01(rng),
                    cover.min().y() + 10 + (cover.sizes().y() - 20) * u01(rng));
    const bool outside = c.x() < -20 || c.y() < -20 || c.x() > kSide + 20 || c.y() > kSide + 20;
    if (outside && clear_of_others(c, 5.0)) {
      s.crowns.push_back({c, 5.0, 130, Crown::Outside});
      ++placed;
    }
  }
  return s;
}

// -- writers ---------------------------------------------------------------------------------

json geo_ring(const Region& r, const geom::Ring& ring) {
  json out = json::array();
  auto push = [&](const Point2D& p) {
    const auto g = geom::unproject_from_scene(p, r.origin);
    out.push_back({std::stod(fmt("%.9f", g.lon)), std::stod(fmt("%.9f", g.lat))});
  };
  for (const auto& p : ring) push(p);
  push(ring.front());
  return out;
}

geom::Ring rect_ring(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

struct LcFeature {
  std::string id;
  std::string cls;
  geom::Ring outer;
  std::vector<geom::Ring> holes;
};

void write_landcover(const Region& r, const std::vector<LcFeature>& features) {
  for (const auto& addr : tiles_covering(r.bbox, 15, "landcover")) {
    const geom::Rect tile = tile_scene_bounds(addr, r.origin);
    json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
    for (const auto& f : features) {
      geom::Rect box;
      for (const auto& p : f.outer) box.extend(p);
      if (!box.intersects(tile)) continue;
      json coords = json::array({geo_ring(r, f.outer)});
      for (const auto& h : f.holes) coords.push_back(geo_ring(r, h));
      fc["features"].push_back({{"type", "Feature"},
                                {"id", f.id},
                                {"properties", {{"class", f.cls}}},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}});
    }
    put(r, "landcover/" + addr.path() + ".geojson", fc.dump(1) + "\n");
  }
}

/// ESRI grids on the 500 m dataset lattice; `z` returns nullopt for gaps.
template <class Z>
void write_elevation(const Region& r, Z&& z) {
  const Range range = lattice(r, kElevTile);
  const int n = static_cast<int>(kElevTile / kElevCell);
  for (long iy = range.y0; iy <= range.y1; ++iy) {
    for (long ix = range.x0; ix <= range.x1; ++ix) {
      std::string out = "ncols " + std::to_string(n) + "\nnrows " + std::to_string(n) + "\nxllcorner " +
                        lattice_name(ix * kElevTile) + "\nyllcorner " + lattice_name(iy * kElevTile) +
                        "\ncellsize " + lattice_name(kElevCell) + "\nNODATA_value -9999\n";
      for (int row = n - 1; row >= 0; --row) {
        for (int col = 0; col < n; ++col) {
          const Point2D local(ix * kElevTile + (col + 0.5) * kElevCell, iy * kElevTile + (row + 0.5) * kElevCell);
          const std::optional<double> v = z(r.to_scene(local));
          if (col) out += ' ';
          out += v ? fmt("%.2f", *v) : std::string("-9999");
        }
        out += '\n';
      }
      put(r, "elevation/" + lattice_name(ix * kElevTile) + "_" + lattice_name(iy * kElevTile) + ".asc", out);
    }
  }
}

template <class Color>
void write_aerial(const Region& r, Color&& color) {
  const Range range = lattice(r, kAerialTile);
  for (long iy = range.y0; iy <= range.y1; ++iy) {
    for (long ix = range.x0; ix <= range.x1; ++ix) {
      ColorRaster img{RgbImage(kAerialPixels, kAerialPixels),
                      geom::Rect(Point2D(ix * kAerialTile, iy * kAerialTile),
                                 Point2D((ix + 1) * kAerialTile, (iy + 1) * kAerialTile))};
      for (int row = 0; row < kAerialPixels; ++row) {
        for (int col = 0; col < kAerialPixels; ++col) img.image.at(row, col) = color(r.to_scene(img.pixel_center(row, col)));
      }
      put(r, "aerial/" + lattice_name(ix * kAerialTile) + "_" + lattice_name(iy * kAerialTile) + ".ppm",
          write_ppm(img.image, img.bounds));
    }
  }
}

void write_trees(const Region& r, const std::vector<Crown>& crowns) {
  for (const auto& addr : tiles_covering(r.bbox, 16, "trees")) {
    vegetation::CrownRaster tile{addr, GrayImage(kTreePixels, kTreePixels, 0), tile_scene_bounds(addr, r.origin)};
    for (int row = 0; row < kTreePixels; ++row) {
      for (int col = 0; col < kTreePixels; ++col) {
        const Point2D p = tile.pixel_center(row, col);
        for (const auto& c : crowns) {
          if ((p - c.c).norm() <= c.radius) tile.pixels.at(row, col) = c.value;
        }
      }
    }
    put(r, "trees/" + addr.path() + ".pgm", write_pgm(tile.pixels));
  }
}

json box_volume(const Point2D& c, double hx, double hy, double z0, double z1) {
  return {{"box", {c.x(), c.y(), (z0 + z1) / 2, hx, 0, 0, 0, hy, 0, 0, 0, (z1 - z0) / 2}}};
}

void write_buildings(const Region& r, const std::vector<Building>& buildings) {
  const Point2D centre = r.to_local(r.bounds.center());
  json root = {{"boundingVolume", box_volume(centre, kSide / 2 + 20, kSide / 2 + 20, -10, 80)},
               {"geometricError", 50},
               {"refine", "ADD"},
               {"children", json::array()}};
  const char* names[] = {"sw", "se", "nw", "ne"};
  for (int q = 0; q < 4; ++q) {
    const Point2D qc(kSide / 4 * ((q % 2) ? 3 : 1), kSide / 4 * ((q / 2) ? 3 : 1));
    const Point2D rtc = r.to_local(qc);
    std::vector<buildings::BatchedBuilding> batch;
    for (const auto& b : buildings) {
      const Point2D mid((b.x0 + b.x1) / 2, (b.y0 + b.y1) / 2);
      if ((mid.x() < kSide / 2) == (q % 2 == 0) && (mid.y() < kSide / 2) == (q / 2 == 0)) {
        const double base = round_to(terrain_z(mid), 0.01);
        auto bb = buildings::box_building(b.id, b.x0 - qc.x(), b.y0 - qc.y(), b.x1 - qc.x(), b.y1 - qc.y(), b.height);
        for (auto& v : bb.vertices) v.z() += base;
        bb.attributes = {{"use", b.use}, {"year", std::to_string(b.year)}, {"height", fmt("%g", b.height)}};
        batch.push_back(std::move(bb));
      }
    }
    const std::string uri = std::string("tiles/") + names[q] + ".b3dm";
    put(r, "buildings/" + uri, buildings::write_b3dm(buildings::make_b3dm(batch, {rtc.x(), rtc.y(), 0.0})));
    root["children"].push_back({{"boundingVolume", box_volume(rtc, kSide / 4 + 10, kSide / 4 + 10, -10, 80)},
                                {"geometricError", 0},
                                {"content", {{"uri", uri}}}});
  }
  json tileset = {{"asset", {{"version", "1.0"}}}, {"geometricError", 100}, {"root", root}};
  put(r, "buildings/tileset.json", tileset.dump(1) + "\n");
}

void write_transit(const Region& r) {
  std::string net = "# fixture network, scene metres from the bbox corner\n";
  net += "origin " + fmt("%.10f", r.origin.lat) + " " + fmt("%.10f", r.origin.lon) + "\n";
  net += "agency Fixture Transit\n";
  net += "route 7 Station North\nxy 30 475\nxy 455 475\nxy 455 960\nstop_xy 30 475 Depot\nstop_xy 455 700 Park\nend\n";
  net += "route 12 Hospital\nxy 970 475\nxy 455 475\nxy 455 40\nstop_xy 970 475 Ring\nstop_xy 455 40 Hospital\nend\n";
  put(r, "transit/network.txt", net);

  const std::vector<std::vector<Point2D>> routes = {{{30, 475}, {455, 475}, {455, 960}},
                                                    {{970, 475}, {455, 475}, {455, 40}}};
  const char* ids[] = {"7", "12"};
  auto at = [&](const std::vector<Point2D>& pts, double arc) {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double len = (pts[i + 1] - pts[i]).norm();
      if (arc <= len || i + 2 == pts.size()) return Point2D(pts[i] + (pts[i + 1] - pts[i]) * std::min(arc, len) / len);
      arc -= len;
    }
    return pts.back();
  };
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> speed(5.0, 11.0), gap(20.0, 45.0), jitter(-3.0, 3.0), start(0.0, 200.0);
  std::vector<std::pair<double, std::string>> lines;
  for (int v = 0; v < 6; ++v) {
    const auto& pts = routes[v % 2];
    const double s = speed(rng), a0 = start(rng);
    for (double t = 5.0 * v; t <= 300.0; t += gap(rng)) {
      const Point2D p = at(pts, a0 + s * t) + Point2D(jitter(rng), jitter(rng));
      const auto g = geom::unproject_from_scene(p, r.origin);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.3f bus%02d %s %.9f %.9f\n", t, v, ids[v % 2], g.lat, g.lon);
      lines.emplace_back(t, buf);
    }
  }
  std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string replay = "# t vehicle route lat lon\n";
  for (const auto& [t, l] : lines) replay += l;
  put(r, "transit/replay.txt", replay);
}

json config_for(const Region& r, double base_cell, bool transit) {
  json c;
  c["dataset_origin"] = {{"lat", kDatasetOrigin.lat}, {"lon", kDatasetOrigin.lon}};
  c["offline"] = true;
  c["fixtures"] = ".";
  c["elevation_tile_size"] = kElevTile;
  c["aerial_tile_size"] = kAerialTile;
  c["landcover_zoom"] = 15;
  c["tree_zoom"] = 16;
  if (transit) c["transit_network"] = "transit/network.txt";
  c["defaults"] = {{"bbox", {r.bbox.min_lat, r.bbox.min_lon, r.bbox.max_lat, r.bbox.max_lon}},
                   {"n", 256},
                   {"seed", 7},
                   {"max_extent", 5000},
                   {"output", r.name + ".glb"},
                   {"lod", {{"base_cell", base_cell}, {"max_depth", 6}, {"split_threshold", 0.1},
                            {"viewpoint_offset", {0, 0, 300}}}},
                   {"fill", {{"max_radius", 50}, {"min_samples", 4}}},
                   {"water", {{"shore_offset", 2}, {"percentile", 10}}},
                   {"crowns", {{"min_pixels", 3}, {"small_max", 85}, {"medium_max", 170}}}};
  return c;
}

void make_populated(const fs::path& root) {
  const Region r = make_region("region", {51.84, 5.86}, kSide, root);
  const Scenery s = make_scenery(r);

  std::vector<LcFeature> lc;
  lc.push_back({"grass", "grass", rect_ring(-60, -60, kSide + 60, kSide + 60), {}});
  lc.push_back({"road-ew", "road", rect_ring(-60, 470, kSide + 60, 480), {}});
  lc.push_back({"road-ns", "road", rect_ring(450, -60, 460, kSide + 60), {}});
  lc.push_back({"cycle-ew", "cycle_lane", rect_ring(-60, 480, kSide + 60, 483), {}});
  lc.push_back({"farm", "farmland", rect_ring(850, 50, 980, 180), {}});
  for (std::size_t i = 0; i < s.water.size(); ++i) {
    lc.push_back({s.water_ids[i], "water", s.water[i].outer(), s.water[i].holes()});
  }
  write_landcover(r, lc);

  write_elevation(r, [&](const Point2D& p) -> std::optional<double> {
    for (const auto& b : s.buildings) {
      if (in_building(p, b)) return std::nullopt;
    }
    for (const auto& h : s.holes) {
      if ((p - h).norm() < 8.0) return std::nullopt;
    }
    for (const auto& w : s.water) {
      if (geom::point_in_polygon(p, w)) {
        // Surveys leave open water empty except for a narrow bank.
        if (dist_to_ring(p, w.outer()) > 4.0) return std::nullopt;
        return round_to(terrain_z(p) - 0.8, 0.01);
      }
    }
    return round_to(terrain_z(p), 0.01);
  });

  write_aerial(r, [&](const Point2D& p) -> Rgb {
    for (const auto& b : s.buildings) {
      if (in_building(p, b)) return b.roof;
    }
    for (const auto& w : s.water) {
      if (geom::point_in_polygon(p, w)) return {40, 70, 120};
    }
    if ((p.y() >= 470 && p.y() <= 480) || (p.x() >= 450 && p.x() <= 460)) return {80, 80, 85};
    return {90, 140, 70};
  });
  write_buildings(r, s.buildings);
  write_trees(r, s.crowns);
  write_transit(r);
  put(r, "config.json", config_for(r, 250, true).dump(2) + "\n");

  std::size_t kept = 0, on_water = 0, outside = 0;
  for (const auto& c : s.crowns) {
    kept += c.fate == Crown::Kept;
    on_water += c.fate == Crown::OnWater;
    outside += c.fate == Crown::Outside;
  }
  json roofs = json::object();
  for (const auto& b : s.buildings) {
    char hex[8];
    std::snprintf(hex, sizeof hex, "#%02x%02x%02x", b.roof[0], b.roof[1], b.roof[2]);
    roofs[b.id] = hex;
  }
  json truth;
  truth["counts"] = {{"terrain", 1}, {"water", s.water.size()}, {"building", s.buildings.size()},
                     {"tree", kept},  {"vehicle-track", 2}};
  truth["trees_on_water"] = on_water;
  truth["trees_outside_bbox"] = outside;
  truth["roof_colors"] = roofs;
  truth["elevation_gaps_unfilled"] = 0;
  put(r, "ground_truth.json", truth.dump(2) + "\n");
  std::printf("%s: %zu buildings, %zu water bodies, %zu trees (+%zu on water, +%zu outside)\n",
              r.dir.string().c_str(), s.buildings.size(), s.water.size(), kept, on_water, outside);
}

void make_empty(const fs::path& root) {
  const Region r = make_region("empty", {51.86, 5.9}, 300.0, root);
  write_landcover(r, {});
  write_elevation(r, [](const Point2D&) -> std::optional<double> { return 5.0; });
  json tileset = {{"asset", {{"version", "1.0"}}},
                  {"geometricError", 10},
                  {"root", {{"boundingVolume", box_volume(r.to_local(r.bounds.center()), 200, 200, 0, 20)},
                            {"geometricError", 0}}}};
  put(r, "buildings/tileset.json", tileset.dump(1) + "\n");
  write_trees(r, {});
  put(r, "config.json", config_for(r, 150, false).dump(2) + "\n");
  json truth;
  truth["counts"] = {{"terrain", 1}, {"water", 0}, {"building", 0}, {"tree", 0}, {"vehicle-track", 0}};
  put(r, "ground_truth.json", truth.dump(2) + "\n");
  std::printf("%s: empty region\n", r.dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_fixtures OUT_DIR\n");
    return 2;
  }
  try {
    make_populated(argv[1]);
    make_empty(argv[1]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_fixtures: %s\n", e.what());
    return 1;
  }
  return 0;
}
