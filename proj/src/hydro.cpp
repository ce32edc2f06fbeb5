#include "geoscene/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>

#include "geoscene/error.hpp"

namespace geoscene::hydro {

using geom::PolygonWithHoles;
using geom::Rect;
using geom::Ring;

double WaterMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) {
    const Point3D& p = vertices[t[0]];
    const Point3D& q = vertices[t[1]];
    const Point3D& r = vertices[t[2]];
    a += 0.5 * ((q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x()));
  }
  return a;
}

double CellRegion::area() const {
  double a = 0.0;
  for (const auto& r : rects) a += r.volume();
  return a;
}

std::vector<PolygonWithHoles> extract_water_polygons(const FeatureCollection& fc) {
  std::vector<PolygonWithHoles> out;
  for (const auto& f : fc.features) {
    if (f.polygon.class_code() != landcover::kWater) continue;
    try {
      geom::validate(f.polygon);
    } catch (const Error&) {
      continue;
    }
    out.push_back(f.polygon);
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile out of [0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  long k = static_cast<long>(std::ceil(p / 100.0 * n)) - 1;
  k = std::clamp(k, 0L, static_cast<long>(values.size()) - 1);
  return values[static_cast<std::size_t>(k)];
}

namespace {

// Outward normal of edge a->b on a counter-clockwise ring.
Point2D edge_normal(const Point2D& a, const Point2D& b) {
  const Point2D d = b - a;
  const double len = d.norm();
  if (len == 0.0) return Point2D::Zero();
  return Point2D(d.y(), -d.x()) / len;
}

double dist_to_segment(const Point2D& p, const Point2D& a, const Point2D& b) {
  const Point2D ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double dist_to_boundary(const Point2D& p, const PolygonWithHoles& poly) {
  double best = std::numeric_limits<double>::infinity();
  auto ring_dist = [&](const Ring& r) {
    for (std::size_t i = 0; i < r.size(); ++i)
      best = std::min(best, dist_to_segment(p, r[i], r[(i + 1) % r.size()]));
  };
  ring_dist(poly.outer());
  for (const auto& h : poly.holes()) ring_dist(h);
  return best;
}

// Closed containment with a small tolerance relative to the triangle size.
bool triangle_contains(const Point3D& a, const Point3D& b, const Point3D& c, const Point2D& p,
                       double* za = nullptr) {
  const Point2D A = a.head<2>(), B = b.head<2>(), C = c.head<2>();
  const double area = geom::orient2d(A, B, C);
  if (area == 0.0) return false;
  const double w0 = geom::orient2d(B, C, p) / area;
  const double w1 = geom::orient2d(C, A, p) / area;
  const double w2 = geom::orient2d(A, B, p) / area;
  constexpr double eps = -1e-9;
  if (w0 < eps || w1 < eps || w2 < eps) return false;
  if (za) *za = w0 * a.z() + w1 * b.z() + w2 * c.z();
  return true;
}

bool rect_contains_closed(const Rect& r, const Point2D& p, double tol) {
  return p.x() >= r.min().x() - tol && p.x() <= r.max().x() + tol && p.y() >= r.min().y() - tol &&
         p.y() <= r.max().y() + tol;
}

// Indices of every mesh triangle that contains p (closed), found by walking
// the LOD quadtree down to the leaves whose rect holds p.
std::vector<std::uint32_t> triangles_at(const terrain::TerrainMesh& mesh, const Point2D& p) {
  std::vector<std::uint32_t> out;
  std::vector<int> stack;
  for (int r = mesh.root_count - 1; r >= 0; --r) stack.push_back(r);
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const auto& node = mesh.nodes[static_cast<std::size_t>(i)];
    const double tol = 1e-9 * std::max(1.0, node.rect.sizes().maxCoeff());
    if (!rect_contains_closed(node.rect, p, tol)) continue;
    if (!node.leaf()) {
      for (int c : node.children) stack.push_back(c);
      continue;
    }
    for (std::uint32_t t = node.first_triangle; t < node.first_triangle + node.triangle_count; ++t) {
      const auto& tri = mesh.triangles[t];
      if (triangle_contains(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], p))
        out.push_back(t);
    }
  }
  return out;
}

bool raise_to(Point3D& v, double floor_z) {
  if (v.z() < floor_z) {
    v.z() = floor_z;
    return true;
  }
  return false;
}

}  // namespace

std::vector<Point2D> shore_points(const PolygonWithHoles& body, double offset) {
  const Ring& r = body.outer();
  const std::size_t n = r.size();
  std::vector<Point2D> out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2D& prev = r[(i + n - 1) % n];
    const Point2D& cur = r[i];
    const Point2D& next = r[(i + 1) % n];
    Point2D nv = edge_normal(prev, cur) + edge_normal(cur, next);
    if (nv.norm() > 1e-12) nv.normalize();
    else nv = edge_normal(cur, next);
    out.push_back(cur + offset * nv);
    out.push_back(0.5 * (cur + next) + offset * edge_normal(cur, next));
  }
  return out;
}

double estimate_water_level(const PolygonWithHoles& body, const terrain::HeightField& hf,
                            const WaterParams& params, std::vector<ShoreSample>* samples) {
  std::vector<double> heights;
  std::vector<ShoreSample> valid;
  for (const Point2D& p : shore_points(body, params.shore_offset)) {
    double z = 0.0;
    try {
      z = terrain::sample_height(hf, p);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfBounds || e.code() == ErrorCode::NoDataAt) continue;
      throw;
    }
    heights.push_back(z);
    valid.push_back({p, z});
  }
  if (heights.empty())
    throw Error(ErrorCode::NoValidShoreSamples, "no shore sample on valid terrain");
  if (samples) *samples = std::move(valid);
  return percentile(std::move(heights), params.percentile);
}

WaterBody make_water_body(int id, PolygonWithHoles region, const terrain::HeightField& hf,
                          const WaterParams& params) {
  WaterBody b;
  b.id = id;
  b.surface_elevation = estimate_water_level(region, hf, params, &b.shore_samples);
  b.region = std::move(region);
  return b;
}

WaterMesh build_water_mesh(const WaterBody& body, const Rect& tile) {
  WaterMesh m;
  m.body_id = body.id;
  for (const auto& piece : geom::clip_polygon_to_rect(body.region, tile)) {
    const auto tri = geom::earcut_triangulate(piece);
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    for (const auto& v : tri.vertices) m.vertices.emplace_back(v.x(), v.y(), body.surface_elevation);
    for (const auto& t : tri.triangles) m.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return m;
}

std::vector<CellRegion> aggregate_water_cells(const landcover::LandCoverRaster& raster) {
  const int n = raster.size();
  std::vector<int> label(static_cast<std::size_t>(n) * n, -1);
  auto idx = [n](int r, int c) { return static_cast<std::size_t>(r) * n + c; };
  int count = 0;
  std::vector<std::size_t> cell_counts;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (raster.at(r, c) != landcover::kWater || label[idx(r, c)] >= 0) continue;
      std::deque<std::pair<int, int>> q{{r, c}};
      label[idx(r, c)] = count;
      std::size_t cells = 0;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop_front();
        ++cells;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= n || xx < 0 || xx >= n) continue;
            if (raster.at(yy, xx) != landcover::kWater || label[idx(yy, xx)] >= 0) continue;
            label[idx(yy, xx)] = count;
            q.emplace_back(yy, xx);
          }
        }
      }
      cell_counts.push_back(cells);
      ++count;
    }
  }

  std::vector<CellRegion> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)].cell_count = cell_counts[static_cast<std::size_t>(i)];
  const Point2D cs = raster.cell_size();
  const Point2D o = raster.bounds().min();

  // Row runs per label; a run extends the open rectangle above it when the
  // column span matches exactly.
  struct Open {
    int c0, c1, r0, r1;
  };
  std::vector<std::map<std::pair<int, int>, Open>> open(static_cast<std::size_t>(count));
  auto emit = [&](int l, const Open& o2) {
    Rect rect(o + Point2D(o2.c0 * cs.x(), o2.r0 * cs.y()), o + Point2D((o2.c1 + 1) * cs.x(), (o2.r1 + 1) * cs.y()));
    auto& reg = out[static_cast<std::size_t>(l)];
    reg.rects.push_back(rect);
    reg.bounds.extend(rect);
  };
  for (int r = 0; r < n; ++r) {
    std::vector<std::map<std::pair<int, int>, Open>> next(static_cast<std::size_t>(count));
    for (int c = 0; c < n;) {
      const int l = label[idx(r, c)];
      if (l < 0) {
        ++c;
        continue;
      }
      int e = c;
      while (e + 1 < n && label[idx(r, e + 1)] == l) ++e;
      auto& prev = open[static_cast<std::size_t>(l)];
      auto it = prev.find({c, e});
      if (it != prev.end()) {
        Open o2 = it->second;
        o2.r1 = r;
        prev.erase(it);
        next[static_cast<std::size_t>(l)][{c, e}] = o2;
      } else {
        next[static_cast<std::size_t>(l)][{c, e}] = Open{c, e, r, r};
      }
      c = e + 1;
    }
    for (int l = 0; l < count; ++l)
      for (const auto& [k, o2] : open[static_cast<std::size_t>(l)]) emit(l, o2);
    open = std::move(next);
  }
  for (int l = 0; l < count; ++l)
    for (const auto& [k, o2] : open[static_cast<std::size_t>(l)]) emit(l, o2);
  for (auto& reg : out) {
    std::sort(reg.rects.begin(), reg.rects.end(), [](const Rect& a, const Rect& b) {
      if (a.min().y() != b.min().y()) return a.min().y() < b.min().y();
      return a.min().x() < b.min().x();
    });
  }
  return out;
}

double terrain_height_at(const terrain::TerrainMesh& mesh, const Point2D& p) {
  for (std::uint32_t t : triangles_at(mesh, p)) {
    const auto& tri = mesh.triangles[t];
    double z = 0.0;
    if (triangle_contains(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], p, &z)) return z;
  }
  throw Error(ErrorCode::OutOfBounds, "point outside terrain mesh");
}

std::size_t snap_shore(terrain::TerrainMesh& mesh, const std::vector<WaterBody>& bodies,
                       const std::vector<WaterMesh>& meshes, double reach) {
  std::vector<bool> moved(mesh.vertices.size(), false);
  for (const auto& body : bodies) {
    const double floor_z = body.surface_elevation - kShoreDrop;
    Rect box = body.region.bounds();
    box.min() -= Point2D::Constant(reach);
    box.max() += Point2D::Constant(reach);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      Point3D& v = mesh.vertices[i];
      if (v.z() >= floor_z) continue;
      const Point2D p = v.head<2>();
      if (!box.contains(p)) continue;
      if (dist_to_boundary(p, body.region) > reach) continue;
      if (raise_to(v, floor_z)) moved[i] = true;
    }
  }

  for (const auto& wm : meshes) {
    for (const auto& wv : wm.vertices) {
      const double floor_z = wv.z() - kShoreDrop;
      for (std::uint32_t t : triangles_at(mesh, wv.head<2>())) {
        for (std::uint32_t vi : mesh.triangles[t]) {
          if (raise_to(mesh.vertices[vi], floor_z)) moved[vi] = true;
        }
      }
    }
  }
  return static_cast<std::size_t>(std::count(moved.begin(), moved.end(), true));
}

std::string audit_table(const WaterBody& body, const WaterParams& params) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "# body %d level %.3f percentile %g offset %g samples %zu\n", body.id,
                body.surface_elevation, params.percentile, params.shore_offset, body.shore_samples.size());
  out += buf;
  out += "x y z\n";
  for (const auto& s : body.shore_samples) {
    std::snprintf(buf, sizeof buf, "%.3f %.3f %.3f\n", s.position.x(), s.position.y(), s.elevation);
    out += buf;
  }
  return out;
}

}  // namespace geoscene::hydro
