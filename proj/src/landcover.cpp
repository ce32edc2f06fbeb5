#include "geoscene/landcover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "geoscene/error.hpp"

namespace geoscene::landcover {

namespace {

Category parse_category(const std::string& s) {
  if (s == "water") return Category::Water;
  if (s == "infrastructure") return Category::Infrastructure;
  if (s == "vegetation") return Category::Vegetation;
  if (s == "generic") return Category::Generic;
  throw Error(ErrorCode::ParseError, "unknown land-cover category '" + s + "'");
}

const char* category_name(Category c) {
  switch (c) {
    case Category::Water: return "water";
    case Category::Infrastructure: return "infrastructure";
    case Category::Vegetation: return "vegetation";
    case Category::Generic: return "generic";
  }
  return "generic";
}

// Cell membership for one feature: `inside` is set for centres that are
// certainly interior to a triangle; centres close to a triangle edge are
// decided by the exact polygon test so the result matches point_in_polygon.
struct PreparedFeature {
  const geom::PolygonWithHoles* poly = nullptr;
  geom::TriangleMesh2D mesh;
  bool triangulated = false;
  int priority = 0;
  ClassCode code = 0;
};

enum class Hit { Outside, Inside, Ambiguous };

Hit classify(const geom::Point2D& p, const geom::Point2D& a, const geom::Point2D& b,
             const geom::Point2D& c, double eps) {
  Hit result = Hit::Inside;
  const geom::Point2D* v[3] = {&a, &b, &c};
  for (int i = 0; i < 3; ++i) {
    const geom::Point2D& s = *v[i];
    const geom::Point2D& t = *v[(i + 1) % 3];
    const double len = (t - s).norm();
    const double d = geom::orient2d(s, t, p) / len;
    if (d < -eps) return Hit::Outside;
    if (d <= eps) result = Hit::Ambiguous;
  }
  return result;
}

}  // namespace

ClassTable::ClassTable(std::vector<LandCoverClass> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.code < b.code; });
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].code == entries_[i - 1].code) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate land-cover code " + std::to_string(entries_[i].code));
    }
  }
  if (const auto* w = find(kWater); w != nullptr && w->category != Category::Water) {
    throw Error(ErrorCode::InvalidArgument, "code 0 is reserved for water");
  }
}

ClassTable ClassTable::defaults() {
  return ClassTable({
      {0, "water", "water", Category::Water},
      {1, "grass", "grass", Category::Vegetation},
      {2, "cycle_lane", "cycle_lane_red", Category::Infrastructure},
      {3, "road", "asphalt", Category::Infrastructure},
      {4, "forest", "forest_floor", Category::Vegetation},
      {5, "farmland", "soil", Category::Vegetation},
      {6, "built_up", "pavement", Category::Generic},
      {7, "sand", "sand", Category::Generic},
      {8, "railway", "ballast", Category::Infrastructure},
  });
}

ClassTable ClassTable::parse(std::string_view text) {
  std::vector<LandCoverClass> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    int code;
    LandCoverClass c;
    if (!(fields >> code)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw Error(ErrorCode::ParseError, "class table line " + std::to_string(lineno));
    }
    if (code < 0 || code >= kUnknown || !(fields >> c.name >> c.texture_key)) {
      throw Error(ErrorCode::ParseError, "class table line " + std::to_string(lineno));
    }
    c.code = static_cast<ClassCode>(code);
    std::string category;
    if (fields >> category) {
      c.category = parse_category(category);
    } else {
      c.category = c.code == kWater ? Category::Water : Category::Generic;
    }
    entries.push_back(std::move(c));
  }
  return ClassTable(std::move(entries));
}

std::string ClassTable::to_text() const {
  std::ostringstream out;
  for (const auto& c : entries_) {
    out << int(c.code) << ' ' << c.name << ' ' << c.texture_key << ' ' << category_name(c.category)
        << '\n';
  }
  return out.str();
}

const LandCoverClass* ClassTable::find(ClassCode code) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), code,
                             [](const LandCoverClass& c, ClassCode k) { return c.code < k; });
  return it != entries_.end() && it->code == code ? &*it : nullptr;
}

const LandCoverClass* ClassTable::find(std::string_view name) const {
  for (const auto& c : entries_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

int ClassTable::priority(ClassCode code) const {
  const auto* c = find(code);
  const int category = static_cast<int>(c != nullptr ? c->category : Category::Generic);
  return category * 256 + code;
}

LandCoverRaster::LandCoverRaster(int n, const geom::Rect& bounds, ClassCode fill)
    : n_(n), bounds_(bounds), cells_(static_cast<std::size_t>(n) * n, fill) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "raster size must be >= 1");
  if (bounds.isEmpty() || (bounds.sizes().array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "raster bounds must have positive extent");
  }
}

geom::Point2D LandCoverRaster::cell_center(int row, int col) const {
  const geom::Point2D cs = cell_size();
  return {bounds_.min().x() + (col + 0.5) * cs.x(), bounds_.min().y() + (row + 0.5) * cs.y()};
}

LandCoverRaster rasterize_classes(const FeatureCollection& fc, int n, const geom::Rect& bounds,
                                  const ClassTable& table) {
  LandCoverRaster raster(n, bounds);
  const geom::Point2D cs = raster.cell_size();
  const geom::Point2D lo = bounds.min();
  const double eps = 1e-7 * std::max(1.0, bounds.sizes().maxCoeff());

  std::vector<PreparedFeature> prepared;
  prepared.reserve(fc.features.size());
  for (const auto& f : fc.features) {
    PreparedFeature pf;
    pf.poly = &f.polygon;
    pf.code = f.polygon.class_code();
    pf.priority = table.priority(pf.code);
    try {
      pf.mesh = geom::earcut_triangulate(f.polygon);
      pf.triangulated = true;
    } catch (const Error&) {
      // fall back to testing the polygon directly over its bounding box
    }
    prepared.push_back(std::move(pf));
  }

  // Cell index range [first, last] whose centres may lie in [a, b].
  auto span = [&](double a, double b, double origin, double size) {
    const int first = static_cast<int>(std::ceil((a - eps - origin) / size - 0.5));
    const int last = static_cast<int>(std::floor((b + eps - origin) / size - 0.5));
    return std::pair{std::max(first, 0), std::min(last, n - 1)};
  };

  auto band = [&](int row_begin, int row_end) {
    std::vector<int> best(static_cast<std::size_t>(row_end - row_begin) * n,
                          std::numeric_limits<int>::max());
    auto offer = [&](int row, int col, const PreparedFeature& pf) {
      int& slot = best[static_cast<std::size_t>(row - row_begin) * n + col];
      if (pf.priority < slot) {
        slot = pf.priority;
        raster.at(row, col) = pf.code;
      }
    };
    for (const auto& pf : prepared) {
      if (!pf.triangulated) {
        const geom::Rect bb = pf.poly->bounds();
        auto [r0, r1] = span(bb.min().y(), bb.max().y(), lo.y(), cs.y());
        auto [c0, c1] = span(bb.min().x(), bb.max().x(), lo.x(), cs.x());
        for (int r = std::max(r0, row_begin); r <= std::min(r1, row_end - 1); ++r) {
          for (int c = c0; c <= c1; ++c) {
            if (geom::point_in_polygon(raster.cell_center(r, c), *pf.poly)) offer(r, c, pf);
          }
        }
        continue;
      }
      for (const auto& tri : pf.mesh.triangles) {
        const auto& a = pf.mesh.vertices[tri[0]];
        const auto& b = pf.mesh.vertices[tri[1]];
        const auto& c = pf.mesh.vertices[tri[2]];
        const geom::Point2D mn = a.cwiseMin(b).cwiseMin(c);
        const geom::Point2D mx = a.cwiseMax(b).cwiseMax(c);
        auto [r0, r1] = span(mn.y(), mx.y(), lo.y(), cs.y());
        auto [c0, c1] = span(mn.x(), mx.x(), lo.x(), cs.x());
        for (int r = std::max(r0, row_begin); r <= std::min(r1, row_end - 1); ++r) {
          for (int col = c0; col <= c1; ++col) {
            const geom::Point2D p = raster.cell_center(r, col);
            switch (classify(p, a, b, c, eps)) {
              case Hit::Inside: offer(r, col, pf); break;
              case Hit::Ambiguous:
                if (geom::point_in_polygon(p, *pf.poly)) offer(r, col, pf);
                break;
              case Hit::Outside: break;
            }
          }
        }
      }
    }
  };

  const int workers =
      std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(1, n / 64));
  if (workers == 1) {
    band(0, n);
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back(band, n * w / workers, n * (w + 1) / workers);
    }
  }
  return raster;
}

ClassCode class_at(const LandCoverRaster& raster, const geom::Point2D& p) {
  const geom::Rect& b = raster.bounds();
  if (!(p.x() >= b.min().x() && p.x() <= b.max().x() && p.y() >= b.min().y() &&
        p.y() <= b.max().y())) {
    throw Error(ErrorCode::OutOfBounds, "point outside land-cover raster");
  }
  const geom::Point2D cs = raster.cell_size();
  const int n = raster.size();
  const int col = std::min(static_cast<int>(std::floor((p.x() - b.min().x()) / cs.x())), n - 1);
  const int row = std::min(static_cast<int>(std::floor((p.y() - b.min().y()) / cs.y())), n - 1);
  return raster.at(row, col);
}

std::string to_pgm(const LandCoverRaster& raster) {
  const int n = raster.size();
  GrayImage img(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) img.at(n - 1 - r, c) = raster.at(r, c);
  }
  return write_pgm(img, raster.bounds());
}

}  // namespace geoscene::landcover
