#include <cmath>
#include <limits>

#include "geoscene/geom.hpp"

namespace geoscene::geom {

namespace {

Rect ring_bounds(const Ring& ring) {
  Rect box;
  for (const auto& p : ring) box.extend(p);
  return box;
}

double ring_scale2(const Ring& ring) {
  const Rect box = ring_bounds(ring);
  return box.isEmpty() ? 0.0 : box.diagonal().squaredNorm();
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(const Point2D& p, const Point2D& q, const Point2D& r) {
  return q.x() <= std::max(p.x(), r.x()) && q.x() >= std::min(p.x(), r.x()) &&
         q.y() <= std::max(p.y(), r.y()) && q.y() >= std::min(p.y(), r.y());
}

bool rings_cross(const Ring& a, const Ring& b) {
  if (!ring_bounds(a).intersects(ring_bounds(b))) return false;
  for (std::size_t i = 0, pi = a.size() - 1; i < a.size(); pi = i++) {
    for (std::size_t j = 0, pj = b.size() - 1; j < b.size(); pj = j++) {
      if (segments_intersect(a[pi], a[i], b[pj], b[j])) return true;
    }
  }
  return false;
}

}  // namespace

Ring clean_ring(Ring ring) {
  Ring out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    if (out.empty() || out.back() != p) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

PolygonWithHoles::PolygonWithHoles(Ring outer, std::vector<Ring> holes, ClassCode class_code)
    : outer_(clean_ring(std::move(outer))), class_code_(class_code) {
  if (signed_area(outer_) < 0.0) std::reverse(outer_.begin(), outer_.end());
  holes_.reserve(holes.size());
  for (auto& h : holes) {
    Ring hole = clean_ring(std::move(h));
    if (signed_area(hole) > 0.0) std::reverse(hole.begin(), hole.end());
    holes_.push_back(std::move(hole));
  }
}

std::size_t PolygonWithHoles::vertex_count() const {
  std::size_t n = outer_.size();
  for (const auto& h : holes_) n += h.size();
  return n;
}

double PolygonWithHoles::area() const {
  double a = std::abs(signed_area(outer_));
  for (const auto& h : holes_) a -= std::abs(signed_area(h));
  return a;
}

Rect PolygonWithHoles::bounds() const { return ring_bounds(outer_); }

bool segments_intersect(const Point2D& a, const Point2D& b, const Point2D& c, const Point2D& d) {
  const int o1 = sign(orient2d(a, b, c));
  const int o2 = sign(orient2d(a, b, d));
  const int o3 = sign(orient2d(c, d, a));
  const int o4 = sign(orient2d(c, d, b));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, c, b)) return true;
  if (o2 == 0 && on_segment(a, d, b)) return true;
  if (o3 == 0 && on_segment(c, a, d)) return true;
  if (o4 == 0 && on_segment(c, b, d)) return true;
  return false;
}

bool ring_is_simple(const Ring& ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2D& a = ring[i];
    const Point2D& b = ring[(i + 1) % n];
    if (a == b) return false;
    // Adjacent edges may only share their common vertex.
    const Point2D& c = ring[(i + 2) % n];
    if (orient2d(a, b, c) == 0.0 && (b - a).dot(c - b) < 0.0) return false;
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

void validate(const PolygonWithHoles& poly) {
  auto check_ring = [](const Ring& ring, const char* what) {
    if (ring.size() < 3) {
      throw Error(ErrorCode::DegeneratePolygon, std::string(what) + " ring has fewer than 3 vertices");
    }
    for (const auto& p : ring) {
      if (!p.allFinite()) throw Error(ErrorCode::DegeneratePolygon, "non-finite vertex");
    }
    const double area = std::abs(signed_area(ring));
    if (!(area > 1e-12 * ring_scale2(ring))) {
      throw Error(ErrorCode::DegeneratePolygon, std::string(what) + " ring has zero area");
    }
    if (!ring_is_simple(ring)) {
      throw Error(ErrorCode::DegeneratePolygon, std::string(what) + " ring self-intersects");
    }
  };

  check_ring(poly.outer(), "outer");
  const auto& holes = poly.holes();
  for (const auto& h : holes) check_ring(h, "hole");

  for (std::size_t i = 0; i < holes.size(); ++i) {
    if (rings_cross(poly.outer(), holes[i]) || !point_in_ring(holes[i].front(), poly.outer())) {
      throw Error(ErrorCode::InvalidTopology, "hole " + std::to_string(i) + " is not inside the outer ring");
    }
    for (std::size_t j = i + 1; j < holes.size(); ++j) {
      if (rings_cross(holes[i], holes[j]) || point_in_ring(holes[i].front(), holes[j]) ||
          point_in_ring(holes[j].front(), holes[i])) {
        throw Error(ErrorCode::InvalidTopology,
                    "holes " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
}

bool point_in_polygon(const Point2D& p, const PolygonWithHoles& poly) {
  if (!point_in_ring(p, poly.outer())) return false;
  for (const auto& h : poly.holes()) {
    if (point_in_ring(p, h)) return false;
  }
  return true;
}

double TriangleMesh2D::area() const {
  double sum = 0.0;
  for (const auto& t : triangles) sum += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return sum;
}

}  // namespace geoscene::geom
