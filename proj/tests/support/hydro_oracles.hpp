#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "geoscene/hydro.hpp"
#include "support/geom_oracles.hpp"

namespace geoscene::testing {

// Star-shaped ring around c with radii in [rmin, rmax] at even angles.
inline Ring star(std::mt19937_64& rng, Point2D c, double rmin, double rmax, int n) {
  std::uniform_real_distribution<double> rad(rmin, rmax);
  Ring r;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const double d = rad(rng);
    r.emplace_back(c.x() + d * std::cos(a), c.y() + d * std::sin(a));
  }
  return r;
}

inline PolygonWithHoles random_lake(std::mt19937_64& rng, Point2D c, double scale) {
  std::uniform_int_distribution<int> verts(5, 14);
  Ring outer = star(rng, c, 0.6 * scale, scale, verts(rng));
  std::vector<Ring> holes;
  if (rng() % 2) holes.push_back(star(rng, c, 0.15 * scale, 0.4 * scale, verts(rng)));
  return PolygonWithHoles(std::move(outer), std::move(holes));
}

terrain::HeightField field(int n, double cell, auto&& f) {
  terrain::HeightField hf(n, n, Point2D(0, 0), cell);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Point2D p = hf.cell_center(r, c);
      hf.values(r, c) = f(p.x(), p.y());
    }
  }
  return hf;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(static_cast<std::size_t>(n)) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

/// 8-connected union of water cells; index is row * n + col.
inline UnionFind water_components(const landcover::LandCoverRaster& raster) {
  const int n = raster.size();
  UnionFind uf(n * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (raster.at(r, c) != landcover::kWater) continue;
      for (auto [dr, dc] : {std::pair{0, 1}, {1, -1}, {1, 0}, {1, 1}}) {
        const int rr = r + dr, cc = c + dc;
        if (rr < n && cc >= 0 && cc < n && raster.at(rr, cc) == landcover::kWater) uf.unite(r * n + c, rr * n + cc);
      }
    }
  }
  return uf;
}

inline std::multiset<std::size_t> component_sizes(const landcover::LandCoverRaster& raster, UnionFind& uf) {
  std::map<int, std::size_t> sizes;
  for (int i = 0; i < raster.size() * raster.size(); ++i) {
    if (raster.cells()[static_cast<std::size_t>(i)] == landcover::kWater) ++sizes[uf.find(i)];
  }
  std::multiset<std::size_t> out;
  for (auto [k, v] : sizes) out.insert(v);
  return out;
}

inline landcover::LandCoverRaster random_water_raster(std::mt19937_64& rng, int n, const geom::Rect& bounds) {
  landcover::LandCoverRaster raster(n, bounds, 1);
  const double density = 0.2 + 0.5 * (rng() % 100) / 100.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if ((rng() % 1000) / 1000.0 < density) raster.at(r, c) = landcover::kWater;
    }
  }
  return raster;
}

/// Bowl-shaped field with a rim, a noisy lake across its slopes and a LOD
/// mesh refined toward the lake.
struct ShoreScene {
  terrain::HeightField hf;
  terrain::TerrainMesh mesh;
  std::vector<hydro::WaterBody> bodies;
  std::vector<hydro::WaterMesh> meshes;
};

inline ShoreScene random_shore_scene(std::mt19937_64& rng, int trial) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const double depth = 4.0 * u(rng);
  const Point2D c(64 * u(rng), 64 * u(rng));
  ShoreScene s{field(64, 2.0,
                     [&](double x, double y) {
                       const double d = (Point2D(x, y) - c).norm();
                       return 10.0 - depth * std::exp(-d * d / 900.0) + 0.3 * std::sin(x / 7.0);
                     }),
               {}, {}, {}};
  landcover::LandCoverRaster raster(32, s.hf.extent(), 1);
  terrain::LodParams lp;
  lp.base_cell = 64;
  lp.max_depth = 4 + trial % 3;
  lp.viewpoint = geom::Point3D(c.x(), c.y(), 50);
  s.mesh = terrain::build_lod_mesh(s.hf, raster, lp);
  s.bodies.push_back(hydro::make_water_body(0, PolygonWithHoles(star(rng, c, 15, 35, 11)), s.hf));
  s.meshes.push_back(hydro::build_water_mesh(s.bodies[0], s.hf.extent()));
  return s;
}

/// Lowest terrain surface height at p over every triangle containing it, or
/// nullopt outside the mesh. Taking the minimum makes a crack count as a gap.
inline std::optional<double> lowest_surface_at(const terrain::TerrainMesh& mesh, const Point2D& p) {
  std::optional<double> best;
  for (const auto& t : mesh.triangles) {
    const Point2D a = mesh.vertices[t[0]].head<2>(), b = mesh.vertices[t[1]].head<2>(),
                  c = mesh.vertices[t[2]].head<2>();
    const double area = geom::orient2d(a, b, c);
    const double w0 = geom::orient2d(b, c, p) / area, w1 = geom::orient2d(c, a, p) / area,
                 w2 = geom::orient2d(a, b, p) / area;
    if (w0 < -1e-12 || w1 < -1e-12 || w2 < -1e-12) continue;
    const double z = w0 * mesh.vertices[t[0]].z() + w1 * mesh.vertices[t[1]].z() + w2 * mesh.vertices[t[2]].z();
    best = best ? std::min(*best, z) : z;
  }
  return best;
}

}  // namespace geoscene::testing
