#include <cmath>
#include <limits>
#include <optional>

#include "geoscene/geom.hpp"

namespace geoscene::geom {

namespace {

bool inside_closed(const Rect& r, const Point2D& p) {
  return p.x() >= r.min().x() && p.x() <= r.max().x() && p.y() >= r.min().y() &&
         p.y() <= r.max().y();
}

bool on_boundary(const Rect& r, const Point2D& p) {
  return inside_closed(r, p) && (p.x() == r.min().x() || p.x() == r.max().x() ||
                                 p.y() == r.min().y() || p.y() == r.max().y());
}

bool on_same_side(const Rect& r, const Point2D& a, const Point2D& b) {
  return (a.x() == r.min().x() && b.x() == r.min().x()) ||
         (a.x() == r.max().x() && b.x() == r.max().x()) ||
         (a.y() == r.min().y() && b.y() == r.min().y()) ||
         (a.y() == r.max().y() && b.y() == r.max().y());
}

/// Removes zero-width spikes (a vertex where the ring doubles back on itself).
Ring remove_spikes(Ring ring) {
  bool changed = true;
  while (changed && ring.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() >= 3; ++i) {
      const Point2D& prev = ring[(i + ring.size() - 1) % ring.size()];
      const Point2D& cur = ring[i];
      const Point2D& next = ring[(i + 1) % ring.size()];
      if (prev == cur || (orient2d(prev, cur, next) == 0.0 && (cur - prev).dot(next - cur) <= 0.0)) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return ring;
}

/// Position along the rectangle perimeter, counter-clockwise from the min corner.
double perimeter_param(const Rect& r, const Point2D& p) {
  const double w = r.sizes().x();
  const double h = r.sizes().y();
  const double d_bottom = std::abs(p.y() - r.min().y());
  const double d_right = std::abs(p.x() - r.max().x());
  const double d_top = std::abs(p.y() - r.max().y());
  const double d_left = std::abs(p.x() - r.min().x());
  const double best = std::min({d_bottom, d_right, d_top, d_left});
  double s;
  if (best == d_bottom) {
    s = p.x() - r.min().x();
  } else if (best == d_right) {
    s = w + (p.y() - r.min().y());
  } else if (best == d_top) {
    s = w + h + (r.max().x() - p.x());
  } else {
    s = 2.0 * w + h + (r.max().y() - p.y());
  }
  const double perimeter = 2.0 * (w + h);
  return s >= perimeter ? s - perimeter : s;
}

struct SegmentClip {
  double t0;
  double t1;
  Point2D enter;
  Point2D leave;
};

/// Liang-Barsky against the closed rectangle; boundary hits are snapped onto
/// the boundary exactly.
std::optional<SegmentClip> clip_segment(const Rect& r, const Point2D& a, const Point2D& b) {
  const Point2D d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  int side0 = -1;
  int side1 = -1;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - r.min().x(), r.max().x() - a.x(), a.y() - r.min().y(),
                       r.max().y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return std::nullopt;
      if (t > t0) {
        t0 = t;
        side0 = i;
      }
    } else {
      if (t < t0) return std::nullopt;
      if (t < t1) {
        t1 = t;
        side1 = i;
      }
    }
  }

  auto point_at = [&](double t, int side, const Point2D& endpoint, bool at_end) {
    Point2D pt = at_end ? endpoint : Point2D(a + t * d);
    pt.x() = std::clamp(pt.x(), r.min().x(), r.max().x());
    pt.y() = std::clamp(pt.y(), r.min().y(), r.max().y());
    switch (side) {
      case 0: pt.x() = r.min().x(); break;
      case 1: pt.x() = r.max().x(); break;
      case 2: pt.y() = r.min().y(); break;
      case 3: pt.y() = r.max().y(); break;
      default: break;
    }
    return pt;
  };
  SegmentClip out{t0, t1, point_at(t0, side0, a, side0 < 0), point_at(t1, side1, b, side1 < 0)};
  return out;
}

struct Piece {
  Ring points;
  double entry = 0.0;
  double exit = 0.0;
  bool used = false;
};

enum class RingState { Inside, Outside, Crossing };

/// Splits a ring into maximal runs inside the closed rectangle. Each run starts
/// and ends on the boundary. Runs lying entirely on the boundary carry no area
/// and are dropped.
RingState ring_pieces(const Ring& ring, const Rect& rect, std::vector<Piece>& pieces) {
  const std::size_t n = ring.size();
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!inside_closed(rect, ring[i])) {
      start = i;
      break;
    }
  }
  if (start == n) return RingState::Inside;

  const std::size_t before = pieces.size();
  std::optional<Piece> current;
  auto close_piece = [&]() {
    Piece piece = std::move(*current);
    current.reset();
    piece.points = clean_ring(std::move(piece.points));
    bool degenerate = true;
    for (std::size_t i = 0; i + 1 < piece.points.size(); ++i) {
      if (!on_same_side(rect, piece.points[i], piece.points[i + 1])) degenerate = false;
    }
    if (degenerate) return;
    piece.entry = perimeter_param(rect, piece.points.front());
    piece.exit = perimeter_param(rect, piece.points.back());
    pieces.push_back(std::move(piece));
  };

  for (std::size_t e = 0; e < n; ++e) {
    const Point2D& a = ring[(start + e) % n];
    const Point2D& b = ring[(start + e + 1) % n];
    const auto hit = clip_segment(rect, a, b);
    if (!hit) {
      if (current) close_piece();
      continue;
    }
    if (!current) current = Piece{{hit->enter}};
    if (hit->t1 < 1.0) {
      current->points.push_back(hit->leave);
      close_piece();
    } else {
      current->points.push_back(b);
    }
  }
  if (current) close_piece();
  return pieces.size() > before ? RingState::Crossing : RingState::Outside;
}

Ring rect_ring(const Rect& r) {
  return {r.min(), Point2D(r.max().x(), r.min().y()), r.max(), Point2D(r.min().x(), r.max().y())};
}

std::vector<Ring> assemble(std::vector<Piece>& pieces, const Rect& rect) {
  const double w = rect.sizes().x();
  const double h = rect.sizes().y();
  const double perimeter = 2.0 * (w + h);
  const std::array<std::pair<double, Point2D>, 4> corners = {{
      {w, Point2D(rect.max().x(), rect.min().y())},
      {w + h, rect.max()},
      {2.0 * w + h, Point2D(rect.min().x(), rect.max().y())},
      {0.0, rect.min()},
  }};
  auto ccw_offset = [&](double from, double to) {
    double d = to - from;
    if (d < 0.0) d += perimeter;
    return d;
  };

  std::vector<Ring> rings;
  for (std::size_t first = 0; first < pieces.size(); ++first) {
    if (pieces[first].used) continue;
    Ring ring;
    std::size_t cur = first;
    for (std::size_t guard = 0; guard <= pieces.size(); ++guard) {
      Piece& piece = pieces[cur];
      piece.used = true;
      ring.insert(ring.end(), piece.points.begin(), piece.points.end());

      std::size_t next = first;
      double best = ccw_offset(piece.exit, pieces[first].entry);
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        if (pieces[k].used) continue;
        const double d = ccw_offset(piece.exit, pieces[k].entry);
        if (d < best || (d == best && next == first)) {
          best = d;
          next = k;
        }
      }

      std::vector<std::pair<double, Point2D>> passed;
      for (const auto& [s, corner] : corners) {
        const double d = ccw_offset(piece.exit, s);
        if (d > 0.0 && d < best) passed.emplace_back(d, corner);
      }
      std::sort(passed.begin(), passed.end(),
                [](const auto& l, const auto& r) { return l.first < r.first; });
      for (const auto& [d, corner] : passed) ring.push_back(corner);

      if (next == first) break;
      cur = next;
    }
    ring = remove_spikes(clean_ring(std::move(ring)));
    if (ring.size() >= 3 && signed_area(ring) > 0.0) rings.push_back(std::move(ring));
  }
  return rings;
}

}  // namespace

std::vector<PolygonWithHoles> clip_polygon_to_rect(const PolygonWithHoles& poly, const Rect& rect) {
  if (poly.outer().size() < 3 || rect.isEmpty()) return {};

  std::vector<Piece> pieces;
  const RingState outer_state = ring_pieces(poly.outer(), rect, pieces);
  if (outer_state == RingState::Inside) return {poly};

  const Point2D center = rect.center();
  const bool rect_in_outer = outer_state == RingState::Outside && point_in_ring(center, poly.outer());
  if (outer_state == RingState::Outside && !rect_in_outer) return {};

  std::vector<const Ring*> inner_holes;
  for (const auto& hole : poly.holes()) {
    const RingState s = ring_pieces(hole, rect, pieces);
    if (s == RingState::Inside) {
      inner_holes.push_back(&hole);
    } else if (s == RingState::Outside && point_in_ring(center, hole)) {
      return {};
    }
  }

  std::vector<Ring> outers = pieces.empty() ? std::vector<Ring>{rect_ring(rect)} : assemble(pieces, rect);

  std::vector<std::vector<Ring>> holes_for(outers.size());
  for (const Ring* hole : inner_holes) {
    const auto probe = std::find_if(hole->begin(), hole->end(),
                                    [&](const Point2D& p) { return !on_boundary(rect, p); });
    const Point2D& p = probe != hole->end() ? *probe : hole->front();
    for (std::size_t i = 0; i < outers.size(); ++i) {
      if (point_in_ring(p, outers[i])) {
        holes_for[i].push_back(*hole);
        break;
      }
    }
  }

  std::vector<PolygonWithHoles> out;
  out.reserve(outers.size());
  for (std::size_t i = 0; i < outers.size(); ++i) {
    out.emplace_back(std::move(outers[i]), std::move(holes_for[i]), poly.class_code());
  }
  return out;
}

}  // namespace geoscene::geom
