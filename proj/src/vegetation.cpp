#include "geoscene/vegetation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "geoscene/error.hpp"
#include "geoscene/hash.hpp"

namespace geoscene::vegetation {

const char* to_string(SizeClass s) {
  switch (s) {
    case SizeClass::Small: return "small";
    case SizeClass::Medium: return "medium";
    case SizeClass::Large: return "large";
  }
  return "small";
}

SizeClass SizeTable::classify(double mean_value) const {
  if (mean_value <= small_max) return SizeClass::Small;
  if (mean_value <= medium_max) return SizeClass::Medium;
  return SizeClass::Large;
}

std::vector<int> label_components(const GrayImage& img, int* count) {
  std::vector<int> labels(img.pixels.size(), -1);
  std::vector<std::pair<int, int>> stack;
  int next = 0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * img.width + c;
      if (img.pixels[i] == 0 || labels[i] >= 0) continue;
      labels[i] = next;
      stack.emplace_back(r, c);
      while (!stack.empty()) {
        const auto [pr, pc] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = pr + dr, nc = pc + dc;
            if (nr < 0 || nc < 0 || nr >= img.height || nc >= img.width) continue;
            const std::size_t j = static_cast<std::size_t>(nr) * img.width + nc;
            if (img.pixels[j] == 0 || labels[j] >= 0) continue;
            labels[j] = next;
            stack.emplace_back(nr, nc);
          }
        }
      }
      ++next;
    }
  }
  if (count) *count = next;
  return labels;
}

namespace {

struct Accum {
  std::size_t pixels = 0;
  double sum_value = 0.0;
  Point2D sum_pos = Point2D::Zero();
  double area = 0.0;

  void add(const CrownRaster& r, int row, int col) {
    ++pixels;
    sum_value += r.pixels.at(row, col);
    sum_pos += r.pixel_center(row, col);
    area += r.pixel_width() * r.pixel_height();
  }
  void add(const Accum& o) {
    pixels += o.pixels;
    sum_value += o.sum_value;
    sum_pos += o.sum_pos;
    area += o.area;
  }
  TreeInstance instance(const SizeTable& sizes) const {
    TreeInstance t;
    t.position = sum_pos / static_cast<double>(pixels);
    t.pixel_count = pixels;
    t.mean_value = sum_value / static_cast<double>(pixels);
    t.size_class = sizes.classify(t.mean_value);
    t.crown_radius = std::sqrt(area / std::numbers::pi);
    return t;
  }
};

std::vector<Accum> accumulate(const CrownRaster& raster, const std::vector<int>& labels, int count) {
  std::vector<Accum> acc(count);
  for (int r = 0; r < raster.pixels.height; ++r) {
    for (int c = 0; c < raster.pixels.width; ++c) {
      const int l = labels[static_cast<std::size_t>(r) * raster.pixels.width + c];
      if (l >= 0) acc[l].add(raster, r, c);
    }
  }
  return acc;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool same(double a, double b) { return std::abs(a - b) <= 1e-6 * (1.0 + std::abs(a)); }

}  // namespace

std::vector<TreeInstance> detect_crowns(const CrownRaster& raster, const CrownParams& params) {
  int count = 0;
  const auto labels = label_components(raster.pixels, &count);
  const auto acc = accumulate(raster, labels, count);
  std::vector<TreeInstance> out;
  for (int l = 0; l < count; ++l) {
    if (acc[l].pixels < static_cast<std::size_t>(std::max(1, params.min_pixels))) continue;
    TreeInstance t = acc[l].instance(params.sizes);
    t.tile = raster.addr;
    t.component = l;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TreeInstance> merge_cross_tile(const std::map<TileAddress, std::vector<TreeInstance>>& per_tile,
                                           const std::map<TileAddress, CrownRaster>& rasters,
                                           const CrownParams& params) {
  struct TileInfo {
    const CrownRaster* raster;
    std::vector<int> labels;
    std::vector<Accum> acc;
    std::size_t first_node;
  };
  std::map<TileAddress, TileInfo> tiles;
  std::size_t nodes = 0;
  for (const auto& [addr, raster] : rasters) {
    int count = 0;
    auto labels = label_components(raster.pixels, &count);
    auto acc = accumulate(raster, labels, count);
    tiles.emplace(addr, TileInfo{&raster, std::move(labels), std::move(acc), nodes});
    nodes += static_cast<std::size_t>(count);
  }
  UnionFind uf(nodes);

  auto label_at = [](const TileInfo& t, int r, int c) {
    const auto& img = t.raster->pixels;
    if (r < 0 || c < 0 || r >= img.height || c >= img.width) return -1;
    return t.labels[static_cast<std::size_t>(r) * img.width + c];
  };
  auto link = [&](const TileInfo& a, int ra, int ca, const TileInfo& b, int rb, int cb) {
    const int la = label_at(a, ra, ca), lb = label_at(b, rb, cb);
    if (la >= 0 && lb >= 0) uf.unite(a.first_node + la, b.first_node + lb);
  };
  auto neighbour = [&](const TileAddress& at, int dx, int dy) -> const TileInfo* {
    TileAddress n = at;
    n.x += dx;
    n.y += dy;
    auto it = tiles.find(n);
    return it == tiles.end() ? nullptr : &it->second;
  };

  for (const auto& [addr, a] : tiles) {
    const auto& ia = a.raster->pixels;
    const geom::Rect& ba = a.raster->bounds;
    // East: tile x grows eastward.
    if (const TileInfo* b = neighbour(addr, 1, 0)) {
      const geom::Rect& bb = b->raster->bounds;
      if (!same(ba.max().x(), bb.min().x()) || !same(ba.min().y(), bb.min().y()) || !same(ba.max().y(), bb.max().y()) ||
          ia.height != b->raster->pixels.height) {
        throw Error(ErrorCode::InconsistentTiling, "tree tiles " + addr.path() + " and its east neighbour do not line up");
      }
      for (int r = 0; r < ia.height; ++r) {
        for (int d = -1; d <= 1; ++d) link(a, r, ia.width - 1, *b, r + d, 0);
      }
    }
    // South: tile y grows southward.
    if (const TileInfo* b = neighbour(addr, 0, 1)) {
      const geom::Rect& bb = b->raster->bounds;
      if (!same(ba.min().y(), bb.max().y()) || !same(ba.min().x(), bb.min().x()) || !same(ba.max().x(), bb.max().x()) ||
          ia.width != b->raster->pixels.width) {
        throw Error(ErrorCode::InconsistentTiling, "tree tiles " + addr.path() + " and its south neighbour do not line up");
      }
      for (int c = 0; c < ia.width; ++c) {
        for (int d = -1; d <= 1; ++d) link(a, ia.height - 1, c, *b, 0, c + d);
      }
    }
    if (const TileInfo* b = neighbour(addr, 1, 1)) link(a, ia.height - 1, ia.width - 1, *b, 0, 0);
    if (const TileInfo* b = neighbour(addr, -1, 1)) link(a, ia.height - 1, 0, *b, 0, b->raster->pixels.width - 1);
  }

  // Group members by root; nodes are numbered in tile order so the root is
  // the first tile's component.
  std::map<std::size_t, std::vector<std::pair<const TileAddress*, int>>> groups;
  for (const auto& [addr, t] : tiles) {
    for (std::size_t l = 0; l < t.acc.size(); ++l) groups[uf.find(t.first_node + l)].emplace_back(&addr, static_cast<int>(l));
  }

  std::vector<TreeInstance> out;
  for (const auto& [addr, list] : per_tile) {
    auto it = tiles.find(addr);
    for (const auto& inst : list) {
      if (it == tiles.end()) {
        out.push_back(inst);  // no raster to merge against
        continue;
      }
      if (inst.component < 0 || static_cast<std::size_t>(inst.component) >= it->second.acc.size()) {
        throw Error(ErrorCode::InvalidArgument, "tree instance refers to unknown component in tile " + addr.path());
      }
      const auto& group = groups.at(uf.find(it->second.first_node + inst.component));
      if (group.size() == 1) out.push_back(inst);
    }
  }
  for (const auto& [root, group] : groups) {
    if (group.size() < 2) continue;
    Accum sum;
    for (const auto& [addr, l] : group) sum.add(tiles.at(*addr).acc[l]);
    if (sum.pixels < static_cast<std::size_t>(std::max(1, params.min_pixels))) continue;
    TreeInstance t = sum.instance(params.sizes);
    t.tile = *group.front().first;
    t.component = group.front().second;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const TreeInstance& a, const TreeInstance& b) {
    if (a.tile != b.tile) return a.tile < b.tile;
    if (a.component != b.component) return a.component < b.component;
    return std::make_pair(a.position.x(), a.position.y()) < std::make_pair(b.position.x(), b.position.y());
  });
  return out;
}

Placement place_trees(std::vector<TreeInstance> instances, const terrain::HeightField& hf,
                      const landcover::LandCoverRaster& classes, std::uint64_t seed) {
  Placement out;
  for (auto& t : instances) {
    bool water = false;
    if (classes.size() > 0) {
      try {
        water = landcover::class_at(classes, t.position) == landcover::kWater;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfBounds) throw;
      }
    }
    if (water) {
      ++out.dropped_on_water;
      continue;
    }
    t.elevation = terrain::sample_height_or(hf, t.position, 0.0);
    const long long qx = std::llround(t.position.x() * 1000.0), qy = std::llround(t.position.y() * 1000.0);
    const std::string key = std::to_string(qx) + "," + std::to_string(qy);
    const std::uint64_t h = splitmix64(fnv1a(key, seed));
    t.model_key = std::string("tree_") + to_string(t.size_class) + "_" + std::to_string(h % 3);
    out.trees.push_back(std::move(t));
  }
  return out;
}

std::string to_table(const std::vector<TreeInstance>& trees) {
  std::string out = "x y z size_class crown_radius model_key\n";
  char buf[160];
  for (const auto& t : trees) {
    std::snprintf(buf, sizeof buf, "%.3f %.3f %.3f %s %.3f ", t.position.x(), t.position.y(), t.elevation.value_or(0.0),
                  to_string(t.size_class), t.crown_radius);
    out += buf;
    out += t.model_key.empty() ? "-" : t.model_key;
    out += '\n';
  }
  return out;
}

}  // namespace geoscene::vegetation
