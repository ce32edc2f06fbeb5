#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "geoscene/vegetation.hpp"

namespace geoscene::testing {

using geom::Point2D;
using geom::Rect;
using vegetation::CrownRaster;
using vegetation::TreeInstance;

struct OracleCrown {
  std::size_t pixels = 0;
  Point2D centroid = Point2D::Zero();
  double mean = 0.0;
  Rect hull_box;
};

// Pixel union-find over 8-neighbour pairs; independent of the flood fill.
inline std::vector<OracleCrown> oracle_crowns(const GrayImage& img, const Rect& bounds, int min_pixels = 3) {
  const int w = img.width, h = img.height;
  std::vector<int> parent(static_cast<std::size_t>(w) * h);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.at(r, c)) continue;
      const int a = r * w + c;
      for (auto [dr, dc] : {std::pair{0, 1}, {1, -1}, {1, 0}, {1, 1}}) {
        const int nr = r + dr, nc = c + dc;
        if (nr >= h || nc < 0 || nc >= w || !img.at(nr, nc)) continue;
        parent[find(nr * w + nc)] = find(a);
      }
    }
  }
  const double pw = bounds.sizes().x() / w, ph = bounds.sizes().y() / h;
  std::map<int, OracleCrown> by_root;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!img.at(r, c)) continue;
      auto& o = by_root[find(r * w + c)];
      const Point2D p(bounds.min().x() + (c + 0.5) * pw, bounds.max().y() - (r + 0.5) * ph);
      ++o.pixels;
      o.centroid += p;
      o.mean += img.at(r, c);
      o.hull_box.extend(p);
    }
  }
  std::vector<OracleCrown> out;
  for (auto& [root, o] : by_root) {
    if (o.pixels < static_cast<std::size_t>(min_pixels)) continue;
    o.centroid /= static_cast<double>(o.pixels);
    o.mean /= static_cast<double>(o.pixels);
    out.push_back(o);
  }
  return out;
}

inline CrownRaster make_raster(int w, int h, const Rect& bounds, TileAddress addr = {18, 100, 200, "trees"}) {
  return {addr, GrayImage(w, h), bounds};
}

inline void disk(GrayImage& img, double cr, double cc, double radius, std::uint8_t value) {
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (std::hypot(r - cr, c - cc) <= radius) img.at(r, c) = value;
    }
  }
}

inline GrayImage random_crowns(std::mt19937_64& rng, int w, int h) {
  GrayImage img(w, h);
  std::uniform_real_distribution<double> row(-3, h + 3), col(-3, w + 3), rad(0.4, 6);
  std::uniform_int_distribution<int> value(1, 255);
  const int blobs = 3 + static_cast<int>(rng() % 20);
  for (int i = 0; i < blobs; ++i) disk(img, row(rng), col(rng), rad(rng), static_cast<std::uint8_t>(value(rng)));
  const int noise = static_cast<int>(rng() % 30);
  for (int i = 0; i < noise; ++i) {
    img.at(static_cast<int>(rng() % h), static_cast<int>(rng() % w)) = static_cast<std::uint8_t>(value(rng));
  }
  return img;
}

// Nearest-centroid matching; returns max distance, or infinity on count mismatch.
inline double max_centroid_gap(std::vector<Point2D> a, std::vector<Point2D> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (const auto& p : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](const Point2D& x, const Point2D& y) { return (x - p).norm() < (y - p).norm(); });
    worst = std::max(worst, (*it - p).norm());
    b.erase(it);
  }
  return worst;
}

// Splits a raster into 2x2 tiles with exact shared boundaries.
inline std::map<TileAddress, CrownRaster> split4(const CrownRaster& whole, int col_cut, int row_cut) {
  std::map<TileAddress, CrownRaster> out;
  const double pw = whole.pixel_width(), ph = whole.pixel_height();
  const double xs[] = {whole.bounds.min().x(), whole.bounds.min().x() + col_cut * pw, whole.bounds.max().x()};
  const double ys[] = {whole.bounds.max().y(), whole.bounds.max().y() - row_cut * ph, whole.bounds.min().y()};
  const int c0[] = {0, col_cut, whole.pixels.width};
  const int r0[] = {0, row_cut, whole.pixels.height};
  for (int ty = 0; ty < 2; ++ty) {
    for (int tx = 0; tx < 2; ++tx) {
      TileAddress addr{18, 500 + tx, 700 + ty, "trees"};
      CrownRaster t = make_raster(c0[tx + 1] - c0[tx], r0[ty + 1] - r0[ty],
                                  Rect(Point2D(xs[tx], ys[ty + 1]), Point2D(xs[tx + 1], ys[ty])), addr);
      for (int r = 0; r < t.pixels.height; ++r) {
        for (int c = 0; c < t.pixels.width; ++c) t.pixels.at(r, c) = whole.pixels.at(r0[ty] + r, c0[tx] + c);
      }
      out.emplace(addr, std::move(t));
    }
  }
  return out;
}

inline std::vector<TreeInstance> detect_and_merge(const std::map<TileAddress, CrownRaster>& tiles) {
  std::map<TileAddress, std::vector<TreeInstance>> per_tile;
  for (const auto& [addr, t] : tiles) per_tile[addr] = vegetation::detect_crowns(t);
  return vegetation::merge_cross_tile(per_tile, tiles);
}

inline std::vector<Point2D> positions(const std::vector<TreeInstance>& v) {
  std::vector<Point2D> out;
  for (const auto& t : v) out.push_back(t.position);
  return out;
}

}  // namespace geoscene::testing
