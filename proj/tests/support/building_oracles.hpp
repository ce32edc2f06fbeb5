#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "geoscene/buildings.hpp"

namespace geoscene::testing {

using geom::Point2D;
using geom::Point3D;

using Tri3 = std::array<std::array<double, 3>, 3>;

// Orientation-preserving canonical form: rotate so the smallest corner is first.
inline Tri3 canonical(const Point3D& a, const Point3D& b, const Point3D& c) {
  Tri3 t{{{a.x(), a.y(), a.z()}, {b.x(), b.y(), b.z()}, {c.x(), c.y(), c.z()}}};
  const auto m = std::min_element(t.begin(), t.end()) - t.begin();
  std::rotate(t.begin(), t.begin() + m, t.end());
  return t;
}

inline std::vector<Tri3> triangle_multiset(const std::vector<buildings::BuildingMesh>& meshes) {
  std::vector<Tri3> out;
  for (const auto& m : meshes) {
    for (const auto& t : m.triangles) out.push_back(canonical(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline buildings::BatchedBuilding random_box(std::mt19937_64& rng, const std::string& id) {
  std::uniform_real_distribution<double> pos(-200, 200), size(4, 30), height(3, 40);
  const double x0 = pos(rng), y0 = pos(rng);
  auto b = buildings::box_building(id, x0, y0, x0 + size(rng), y0 + size(rng), height(rng));
  b.attributes["height"] = std::to_string(std::lround(height(rng)));
  if (rng() % 2) b.attributes["use"] = (rng() % 2) ? "office" : "residential";
  return b;
}

// Prism over a convex polygon, walls outward, flat roof.
inline buildings::BuildingMesh random_prism(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), rad(5, 20), height(3, 30);
  std::vector<double> angles(3 + rng() % 5);
  for (auto& a : angles) a = ang(rng);
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end(), [](double a, double b) { return b - a < 0.2; }), angles.end());
  if (angles.size() < 3) angles = {0.0, 2.0, 4.0};
  const double r = rad(rng), h = height(rng);
  buildings::BuildingMesh m;
  m.id = "prism";
  const auto n = static_cast<std::uint32_t>(angles.size());
  for (double a : angles) m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
  for (double a : angles) m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), h);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.triangles.push_back({i, j, n + j});
    m.triangles.push_back({i, n + j, n + i});
  }
  for (std::uint32_t i = 1; i + 1 < n; ++i) m.triangles.push_back({n, n + i, n + i + 1});
  return m;
}

inline buildings::BuildingMesh to_mesh(const buildings::BatchedBuilding& b) {
  buildings::BuildingMesh m;
  m.id = b.id;
  m.vertices = b.vertices;
  m.triangles = b.triangles;
  return m;
}

inline buildings::BuildingMesh rigid(const buildings::BuildingMesh& m, double angle, const Eigen::Vector3d& shift) {
  buildings::BuildingMesh out = m;
  const Eigen::AngleAxisd rot(angle, Eigen::Vector3d::UnitZ());
  for (auto& v : out.vertices) v = rot * v + shift;
  return out;
}

/// Random boxes written to a b3dm, optionally with a binary batch column
/// (every third trial) and a binary RTC_CENTER (every fifth).
inline buildings::B3dmPayload random_payload(std::mt19937_64& rng, int trial) {
  std::vector<buildings::BatchedBuilding> bs;
  const int n = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) bs.push_back(random_box(rng, "bag." + std::to_string(rng() % 100000)));
  std::uniform_real_distribution<double> c(-1e5, 1e5);
  auto p = buildings::make_b3dm(bs, {c(rng), c(rng), c(rng) / 100});
  if (trial % 3 == 0) {
    std::vector<float> heights(n);
    for (auto& h : heights) h = static_cast<float>(c(rng) / 1000);
    p.batch_table_binary.assign(reinterpret_cast<const char*>(heights.data()), heights.size() * 4);
    p.batch_table["measured"] = {{"byteOffset", 0}, {"componentType", "FLOAT"}, {"type", "SCALAR"}};
  }
  if (trial % 5 == 0) {
    const float rtc[3] = {1.5f, 2.5f, -3.0f};
    p.feature_table_binary.assign(reinterpret_cast<const char*>(rtc), sizeof rtc);
    p.feature_table["RTC_CENTER"] = {{"byteOffset", 0}};
  }
  return p;
}

/// The meshes split_by_batch must return for boxes stored relative to rtc:
/// float32 positions plus the centre.
inline std::vector<buildings::BuildingMesh> expected_split(const std::vector<buildings::BatchedBuilding>& bs,
                                                           const Point3D& rtc) {
  std::vector<buildings::BuildingMesh> out;
  for (const auto& b : bs) {
    auto m = to_mesh(b);
    for (auto& v : m.vertices) {
      const double fx = static_cast<float>(v.x()), fy = static_cast<float>(v.y()), fz = static_cast<float>(v.z());
      v = Point3D(fx, fy, fz) + rtc;
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline ColorRaster color_raster(int w, int h, const geom::Rect& bounds) {
  return {RgbImage(w, h), bounds};
}

// Closed-rectangle pixel scan and lower median per channel.
inline Rgb oracle_roof_color(const ColorRaster& img, const geom::Rect& roof) {
  std::array<std::vector<int>, 3> ch;
  for (int r = 0; r < img.image.height; ++r) {
    for (int c = 0; c < img.image.width; ++c) {
      const double x = img.bounds.min().x() + (c + 0.5) * (img.bounds.sizes().x() / img.image.width);
      const double y = img.bounds.max().y() - (r + 0.5) * (img.bounds.sizes().y() / img.image.height);
      if (x < roof.min().x() || x > roof.max().x() || y < roof.min().y() || y > roof.max().y()) continue;
      for (int k = 0; k < 3; ++k) ch[k].push_back(img.image.at(r, c)[k]);
    }
  }
  if (ch[0].size() < 4) return {128, 128, 128};
  Rgb out;
  for (int k = 0; k < 3; ++k) {
    std::sort(ch[k].begin(), ch[k].end());
    out[k] = static_cast<std::uint8_t>(ch[k][(ch[k].size() - 1) / 2]);
  }
  return out;
}

inline buildings::BuildingMesh uv_box(double x0, double y0, double x1, double y1) {
  return buildings::compute_uv(to_mesh(buildings::box_building("r", x0, y0, x1, y1, 6)));
}

struct RoofTrial {
  ColorRaster image;
  geom::Rect roof;
};

/// Random image with 0.25-1 m pixels and a roof rectangle that may stick out
/// of it; every third roof has its edges on pixel centres.
inline RoofTrial random_roof_trial(std::mt19937_64& rng, int trial) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_real_distribution<double> pos(-10, 60), size(0.5, 25);
  const double px = trial % 4 == 0 ? 1.0 : 0.25 + (rng() % 8) * 0.25;
  const int w = 20 + static_cast<int>(rng() % 40), h = 20 + static_cast<int>(rng() % 40);
  auto img = color_raster(w, h, geom::Rect(Point2D(0, 0), Point2D(w * px, h * px)));
  for (auto& p : img.image.pixels) {
    p = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng) / 2),
         static_cast<std::uint8_t>(byte(rng) | 1)};
  }
  double x0 = pos(rng), y0 = pos(rng);
  if (trial % 3 == 0) x0 = std::round(x0 * 2) / 2, y0 = std::round(y0 * 2) / 2;
  const geom::Rect roof(Point2D(x0, y0), Point2D(x0 + size(rng), y0 + size(rng)));
  return {std::move(img), roof};
}

}  // namespace geoscene::testing
