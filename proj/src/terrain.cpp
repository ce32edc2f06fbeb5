#include "geoscene/terrain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "geoscene/error.hpp"

namespace geoscene::terrain {

HeightField::HeightField(int ncols_, int nrows_, Point2D origin_, double cell_size_, double fill,
                         double nodata_)
    : ncols(ncols_), nrows(nrows_), origin(origin_), cell_size(cell_size_), nodata(nodata_),
      values(Eigen::MatrixXd::Constant(nrows_, ncols_, fill)) {
  if (ncols < 1 || nrows < 1 || !(cell_size > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "height field needs positive dimensions");
  }
}

std::size_t HeightField::nodata_count() const {
  return static_cast<std::size_t>((values.array() == nodata).count());
}

// -- ESRI ASCII grid -----------------------------------------------------------

HeightField read_esri_ascii(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::map<std::string, double> header;
  std::string key;
  // Header lines are "key value"; the first numeric token starts the data.
  while (in >> std::ws && in.peek() != EOF && std::isalpha(in.peek())) {
    double value;
    in >> key;
    if (!(in >> value)) throw Error(ErrorCode::DecodeError, "ascii grid: bad header value for " + key);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    header[key] = value;
  }
  auto need = [&](const char* k) {
    auto it = header.find(k);
    if (it == header.end()) throw Error(ErrorCode::DecodeError, std::string("ascii grid: missing ") + k);
    return it->second;
  };
  const int ncols = static_cast<int>(need("ncols"));
  const int nrows = static_cast<int>(need("nrows"));
  const double cs = need("cellsize");
  if (ncols < 1 || nrows < 1 || !(cs > 0.0)) throw Error(ErrorCode::DecodeError, "ascii grid: bad dimensions");
  Point2D origin;
  if (header.count("xllcorner") && header.count("yllcorner")) {
    origin = {header["xllcorner"], header["yllcorner"]};
  } else if (header.count("xllcenter") && header.count("yllcenter")) {
    origin = Point2D(header["xllcenter"], header["yllcenter"]) - Point2D::Constant(cs / 2);
  } else {
    throw Error(ErrorCode::DecodeError, "ascii grid: missing lower-left corner");
  }
  const double nodata = header.count("nodata_value") ? header["nodata_value"] : kDefaultNoData;

  HeightField hf(ncols, nrows, origin, cs, 0.0, nodata);
  for (int r = nrows - 1; r >= 0; --r) {
    for (int c = 0; c < ncols; ++c) {
      double v;
      if (!(in >> v)) throw Error(ErrorCode::DecodeError, "ascii grid: truncated data");
      hf.values(r, c) = v;
    }
  }
  in >> std::ws;
  if (in.peek() != EOF) throw Error(ErrorCode::DecodeError, "ascii grid: trailing data");
  return hf;
}

std::string write_esri_ascii(const HeightField& hf) {
  std::string out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out += "ncols " + std::to_string(hf.ncols) + "\n";
  out += "nrows " + std::to_string(hf.nrows) + "\n";
  out += "xllcorner " + num(hf.origin.x()) + "\n";
  out += "yllcorner " + num(hf.origin.y()) + "\n";
  out += "cellsize " + num(hf.cell_size) + "\n";
  out += "NODATA_value " + num(hf.nodata) + "\n";
  for (int r = hf.nrows - 1; r >= 0; --r) {
    for (int c = 0; c < hf.ncols; ++c) {
      if (c) out += ' ';
      out += num(hf.values(r, c));
    }
    out += '\n';
  }
  return out;
}

// -- gap filling -----------------------------------------------------------------

FillResult fill_gaps(const HeightField& hf, double max_radius, int min_samples) {
  if (hf.nodata_count() == static_cast<std::size_t>(hf.values.size())) {
    throw Error(ErrorCode::AllNoData, "height field has no valid cell");
  }
  struct Offset {
    int dr, dc, ring;
    double dist;
  };
  // Disc offsets sorted by distance; `ring` is the search step that first
  // includes the offset (radius = ring * cell_size, the last step capped).
  std::vector<Offset> offsets;
  const int reach = static_cast<int>(std::floor(max_radius / hf.cell_size));
  const int last_ring = std::max(1, static_cast<int>(std::ceil(max_radius / hf.cell_size - 1e-9)));
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const double d = std::hypot(dr, dc) * hf.cell_size;
      if (d > max_radius * (1 + 1e-12)) continue;
      const int ring = std::clamp(static_cast<int>(std::ceil(d / hf.cell_size - 1e-9)), 1, last_ring);
      offsets.push_back({dr, dc, ring, d});
    }
  }
  std::sort(offsets.begin(), offsets.end(), [](const Offset& a, const Offset& b) {
    return std::tie(a.ring, a.dist, a.dr, a.dc) < std::tie(b.ring, b.dist, b.dr, b.dc);
  });

  FillResult result{hf, 0};
  HeightField& out = result.field;
  std::vector<std::size_t> unfilled_per_band;

  auto fill_rows = [&](int r0, int r1, std::size_t& unfilled) {
    for (int r = r0; r < r1; ++r) {
      for (int c = 0; c < hf.ncols; ++c) {
        if (hf.valid(r, c)) continue;
        // Weighted mean of offsets from the first sample, so a constant
        // neighbourhood reproduces its value exactly.
        double wsum = 0.0, vsum = 0.0, ref = 0.0;
        int count = 0;
        int ring = 0;
        for (const auto& o : offsets) {
          if (o.ring != ring) {
            if (count >= min_samples) break;
            ring = o.ring;
          }
          const int rr = r + o.dr, cc = c + o.dc;
          if (rr < 0 || cc < 0 || rr >= hf.nrows || cc >= hf.ncols || !hf.valid(rr, cc)) continue;
          const double w = 1.0 / (o.dist * o.dist);
          if (count == 0) ref = hf.values(rr, cc);
          wsum += w;
          vsum += w * (hf.values(rr, cc) - ref);
          ++count;
        }
        if (count == 0) {
          ++unfilled;
        } else {
          out.values(r, c) = ref + vsum / wsum;
        }
      }
    }
  };

  const int workers =
      std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(1, hf.nrows / 32));
  unfilled_per_band.assign(workers, 0);
  {
    std::vector<std::jthread> threads;
    for (int w = 1; w < workers; ++w) {
      threads.emplace_back(fill_rows, hf.nrows * w / workers, hf.nrows * (w + 1) / workers,
                           std::ref(unfilled_per_band[w]));
    }
    fill_rows(0, hf.nrows / workers, unfilled_per_band[0]);
  }
  for (auto u : unfilled_per_band) result.unfilled += u;
  return result;
}

// -- sampling ----------------------------------------------------------------------

namespace {

struct Stencil {
  int r0, r1, c0, c1;
  double tr, tc;
};

// Lower/upper cell indices and weights along one axis.
void axis(double f, int n, int& i0, int& i1, double& t) {
  if (n == 1) {
    i0 = i1 = 0;
    t = 0.0;
    return;
  }
  i0 = std::clamp(static_cast<int>(std::floor(f)), 0, n - 2);
  i1 = i0 + 1;
  t = std::clamp(f - i0, 0.0, 1.0);
}

Stencil stencil(const HeightField& hf, const Point2D& p) {
  const Point2D f = (p - hf.origin) / hf.cell_size - Point2D::Constant(0.5);
  Stencil s;
  axis(f.y(), hf.nrows, s.r0, s.r1, s.tr);
  axis(f.x(), hf.ncols, s.c0, s.c1, s.tc);
  return s;
}

}  // namespace

double sample_height(const HeightField& hf, const Point2D& p) {
  const geom::Rect ext = hf.extent();
  if (!(p.x() >= ext.min().x() && p.x() <= ext.max().x() && p.y() >= ext.min().y() &&
        p.y() <= ext.max().y())) {
    throw Error(ErrorCode::OutOfBounds, "sample outside height field");
  }
  const Stencil s = stencil(hf, p);
  const int rows[2] = {s.r0, s.r1};
  const int cols[2] = {s.c0, s.c1};
  const double wr[2] = {1.0 - s.tr, s.tr};
  const double wc[2] = {1.0 - s.tc, s.tc};
  double z = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double w = wr[i] * wc[j];
      if (w == 0.0) continue;
      if (!hf.valid(rows[i], cols[j])) throw Error(ErrorCode::NoDataAt, "nodata cell in bilinear stencil");
      z += w * hf.values(rows[i], cols[j]);
    }
  }
  return z;
}

double sample_height_or(const HeightField& hf, const Point2D& p, double fallback) {
  const Stencil s = stencil(hf, p);
  const int rows[2] = {s.r0, s.r1};
  const int cols[2] = {s.c0, s.c1};
  const double wr[2] = {1.0 - s.tr, s.tr};
  const double wc[2] = {1.0 - s.tc, s.tc};
  double z = 0.0, wsum = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double w = wr[i] * wc[j];
      if (w == 0.0 || !hf.valid(rows[i], cols[j])) continue;
      z += w * hf.values(rows[i], cols[j]);
      wsum += w;
    }
  }
  return wsum > 0.0 ? z / wsum : fallback;
}

// -- LOD mesh ---------------------------------------------------------------------

namespace {

// Node coordinates on the per-depth integer grid.
struct Key {
  int depth, i, j;
  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(depth) << 56) | (static_cast<std::uint64_t>(i) << 28) |
           static_cast<std::uint64_t>(j);
  }
};

class QuadBuilder {
 public:
  QuadBuilder(const HeightField& hf, const landcover::LandCoverRaster& raster, const LodParams& p)
      : hf_(hf), raster_(raster), p_(p), tile_(raster.bounds()) {
    if (p.max_depth < 0 || p.max_depth > 20) throw Error(ErrorCode::InvalidArgument, "max_depth out of range");
    if (!(p.split_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "split_threshold must be > 0");
    if (!(p.base_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "base_cell must be > 0");
    roots_x_ = std::max(1, static_cast<int>(std::lround(tile_.sizes().x() / p.base_cell)));
    roots_y_ = std::max(1, static_cast<int>(std::lround(tile_.sizes().y() / p.base_cell)));
    unit_ = Point2D(tile_.sizes().x() / (roots_x_ * std::ldexp(1.0, p.max_depth)),
                    tile_.sizes().y() / (roots_y_ * std::ldexp(1.0, p.max_depth)));
  }

  TerrainMesh build() {
    for (int j = 0; j < roots_y_; ++j) {
      for (int i = 0; i < roots_x_; ++i) add_node({0, i, j}, -1);
    }
    mesh_.root_count = static_cast<int>(mesh_.nodes.size());
    for (int n = 0; n < static_cast<int>(mesh_.nodes.size()); ++n) {
      if (wants_split(n)) split(n);
    }
    balance();
    for (int n = 0; n < static_cast<int>(mesh_.nodes.size()); ++n) {
      if (mesh_.nodes[n].leaf()) emit_leaf(n);
    }
    for (int n = static_cast<int>(mesh_.nodes.size()) - 1; n >= 0; --n) compute_error(n);
    return std::move(mesh_);
  }

 private:
  Point2D grid_point(long gx, long gy) const {
    const long nx = static_cast<long>(roots_x_) << p_.max_depth;
    const long ny = static_cast<long>(roots_y_) << p_.max_depth;
    const double x = gx == nx ? tile_.max().x() : tile_.min().x() + gx * unit_.x();
    const double y = gy == ny ? tile_.max().y() : tile_.min().y() + gy * unit_.y();
    return {x, y};
  }

  int add_node(const Key& k, int parent) {
    LodNode node;
    const long span = 1L << (p_.max_depth - k.depth);
    node.rect = geom::Rect(grid_point(k.i * span, k.j * span),
                           grid_point((k.i + 1) * span, (k.j + 1) * span));
    node.depth = k.depth;
    node.parent = parent;
    const int id = static_cast<int>(mesh_.nodes.size());
    mesh_.nodes.push_back(node);
    keys_.push_back(k);
    index_[k.packed()] = id;
    return id;
  }

  bool wants_split(int n) const {
    const LodNode& node = mesh_.nodes[n];
    if (node.depth >= p_.max_depth) return false;
    const Point2D c = node.rect.center();
    const Point3D center(c.x(), c.y(), sample_height_or(hf_, c));
    const double size = node.rect.sizes().maxCoeff();
    const double dist = (center - p_.viewpoint).norm();
    return dist == 0.0 || size / dist > p_.split_threshold;
  }

  void split(int n) {
    const Key k = keys_[n];
    static constexpr int di[4] = {0, 1, 0, 1};
    static constexpr int dj[4] = {0, 0, 1, 1};
    for (int q = 0; q < 4; ++q) {
      const int child = add_node({k.depth + 1, 2 * k.i + di[q], 2 * k.j + dj[q]}, n);
      mesh_.nodes[n].children[q] = child;
    }
  }

  int find(const Key& k) const {
    if (k.i < 0 || k.j < 0) return -1;
    auto it = index_.find(k.packed());
    return it == index_.end() ? -1 : it->second;
  }

  bool split_node(const Key& k) const {
    const int n = find(k);
    return n >= 0 && !mesh_.nodes[n].leaf();
  }

  // The two depth+1 cells adjacent to `k` across each edge (W, E, S, N).
  static std::array<std::array<Key, 2>, 4> edge_neighbours(const Key& k) {
    const int d = k.depth + 1, i = 2 * k.i, j = 2 * k.j;
    return {{{{{d, i - 1, j}, {d, i - 1, j + 1}}},
             {{{d, i + 2, j}, {d, i + 2, j + 1}}},
             {{{d, i, j - 1}, {d, i + 1, j - 1}}},
             {{{d, i, j + 2}, {d, i + 1, j + 2}}}}};
  }

  // Split leaves until no neighbour across an edge is more than one level finer.
  void balance() {
    std::vector<int> work;
    for (int n = 0; n < static_cast<int>(mesh_.nodes.size()); ++n) {
      if (mesh_.nodes[n].leaf()) work.push_back(n);
    }
    while (!work.empty()) {
      const int n = work.back();
      work.pop_back();
      if (!mesh_.nodes[n].leaf()) continue;
      const Key k = keys_[n];
      bool must = false;
      for (const auto& edge : edge_neighbours(k)) {
        for (const Key& nb : edge) must = must || split_node(nb);
      }
      if (!must) continue;
      split(n);
      for (int c : mesh_.nodes[n].children) work.push_back(c);
      // Coarser neighbours of the new children may now be out of balance.
      for (const auto& edge : edge_neighbours(k)) {
        for (int up = 0; up <= k.depth; ++up) {
          const Key nb{k.depth - up, edge[0].i >> (up + 1), edge[0].j >> (up + 1)};
          const int m = find(nb);
          if (m >= 0) {
            if (mesh_.nodes[m].leaf()) work.push_back(m);
            break;
          }
        }
      }
    }
  }

  std::uint32_t vertex(long gx, long gy) {
    const std::uint64_t key = (static_cast<std::uint64_t>(gx) << 32) | static_cast<std::uint64_t>(gy);
    auto [it, inserted] = vertex_index_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (inserted) {
      const Point2D p = grid_point(gx, gy);
      mesh_.vertices.emplace_back(p.x(), p.y(), sample_height_or(hf_, p));
      mesh_.vertex_classes.push_back(landcover::class_at(raster_, p));
    }
    return it->second;
  }

  void emit_leaf(int n) {
    const Key k = keys_[n];
    const long span = 1L << (p_.max_depth - k.depth);
    const long x0 = k.i * span, y0 = k.j * span, x1 = x0 + span, y1 = y0 + span;
    const auto nbs = edge_neighbours(k);
    bool mid[4];  // W, E, S, N
    bool any = false;
    for (int e = 0; e < 4; ++e) {
      mid[e] = span > 1 && (find(nbs[e][0]) >= 0);
      any = any || mid[e];
    }
    LodNode& node = mesh_.nodes[n];
    node.first_triangle = static_cast<std::uint32_t>(mesh_.triangles.size());
    const std::uint32_t sw = vertex(x0, y0), se = vertex(x1, y0), nw = vertex(x0, y1), ne = vertex(x1, y1);
    if (!any) {
      mesh_.triangles.push_back({sw, se, ne});
      mesh_.triangles.push_back({sw, ne, nw});
    } else {
      const long h = span / 2;
      const std::uint32_t c = vertex(x0 + h, y0 + h);
      // Counter-clockwise boundary walk from SW, inserting edge midpoints.
      std::vector<std::uint32_t> ring{sw};
      if (mid[2]) ring.push_back(vertex(x0 + h, y0));
      ring.push_back(se);
      if (mid[1]) ring.push_back(vertex(x1, y0 + h));
      ring.push_back(ne);
      if (mid[3]) ring.push_back(vertex(x0 + h, y1));
      ring.push_back(nw);
      if (mid[0]) ring.push_back(vertex(x0, y0 + h));
      for (std::size_t i = 0; i < ring.size(); ++i) {
        mesh_.triangles.push_back({c, ring[i], ring[(i + 1) % ring.size()]});
      }
    }
    node.triangle_count = static_cast<std::uint32_t>(mesh_.triangles.size()) - node.first_triangle;
  }

  // Max |hf - surface| over a 5x5 lattice of the node's rectangle.
  template <typename Surface>
  double lattice_error(const geom::Rect& r, Surface&& surface) const {
    double err = 0.0;
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; b <= 4; ++b) {
        const Point2D p = r.min() + Point2D(b / 4.0 * r.sizes().x(), a / 4.0 * r.sizes().y());
        err = std::max(err, std::abs(sample_height_or(hf_, p) - surface(p)));
      }
    }
    return err;
  }

  void compute_error(int n) {
    LodNode& node = mesh_.nodes[n];
    if (node.leaf()) {
      const auto* tris = mesh_.triangles.data() + node.first_triangle;
      const std::uint32_t count = node.triangle_count;
      node.error = lattice_error(node.rect, [&](const Point2D& p) {
        return surface_height(std::span(tris, count), p);
      });
      return;
    }
    // Error of the node rendered on its own as two triangles.
    const geom::Rect& r = node.rect;
    const Point3D sw = corner(r.min()), ne = corner(r.max());
    const Point3D se = corner({r.max().x(), r.min().y()}), nw = corner({r.min().x(), r.max().y()});
    double err = lattice_error(r, [&](const Point2D& p) {
      const double u = (p.x() - r.min().x()) / r.sizes().x();
      const double v = (p.y() - r.min().y()) / r.sizes().y();
      // Diagonal SW-NE: lower-right triangle when u >= v.
      return u >= v ? sw.z() + u * (se.z() - sw.z()) + v * (ne.z() - se.z())
                    : sw.z() + v * (nw.z() - sw.z()) + u * (ne.z() - nw.z());
    });
    for (int c : node.children) err = std::max(err, mesh_.nodes[c].error);
    node.error = err;
  }

  Point3D corner(const Point2D& p) const { return {p.x(), p.y(), sample_height_or(hf_, p)}; }

  double surface_height(std::span<const geom::Triangle> tris, const Point2D& p) const {
    double best = -1e300, best_z = 0.0;
    for (const auto& t : tris) {
      const Point3D& a = mesh_.vertices[t[0]];
      const Point3D& b = mesh_.vertices[t[1]];
      const Point3D& c = mesh_.vertices[t[2]];
      const Point2D a2 = a.head<2>(), b2 = b.head<2>(), c2 = c.head<2>();
      const double area = geom::orient2d(a2, b2, c2);
      const double l0 = geom::orient2d(b2, c2, p) / area;
      const double l1 = geom::orient2d(c2, a2, p) / area;
      const double l2 = 1.0 - l0 - l1;
      const double score = std::min({l0, l1, l2});  // >= 0 inside; best effort on edges
      if (score > best) {
        best = score;
        best_z = l0 * a.z() + l1 * b.z() + l2 * c.z();
      }
    }
    return best_z;
  }

  const HeightField& hf_;
  const landcover::LandCoverRaster& raster_;
  LodParams p_;
  geom::Rect tile_;
  int roots_x_ = 1, roots_y_ = 1;
  Point2D unit_;
  TerrainMesh mesh_;
  std::vector<Key> keys_;
  std::unordered_map<std::uint64_t, int> index_;
  std::unordered_map<std::uint64_t, std::uint32_t> vertex_index_;
};

}  // namespace

TerrainMesh build_lod_mesh(const HeightField& hf, const landcover::LandCoverRaster& raster,
                           const LodParams& params) {
  return QuadBuilder(hf, raster, params).build();
}

std::string to_obj(const TerrainMesh& mesh) {
  std::string out = "# terrain mesh\n";
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

}  // namespace geoscene::terrain
