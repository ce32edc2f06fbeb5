// Ear-clipping triangulation with hole bridging, after the approach popularised
// by mapbox/earcut: the polygon is kept as a circular doubly-linked list, holes
// are spliced in through bridge edges to their left, and ears are clipped with
// progressively more forgiving passes (filter collinear points, cure local
// self-intersections, split along a valid diagonal).

#include <deque>
#include <limits>

#include "geoscene/geom.hpp"

namespace geoscene::geom {

namespace {

struct Node {
  std::uint32_t index;
  double x;
  double y;
  Node* prev = nullptr;
  Node* next = nullptr;
  bool steiner = false;
};

// Positive when (p, q, r) turns clockwise; zero when collinear.
double turn(const Node* p, const Node* q, const Node* r) {
  return (q->y - p->y) * (r->x - q->x) - (q->x - p->x) * (r->y - q->y);
}

bool equals(const Node* a, const Node* b) { return a->x == b->x && a->y == b->y; }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool on_segment(const Node* p, const Node* q, const Node* r) {
  return q->x <= std::max(p->x, r->x) && q->x >= std::min(p->x, r->x) &&
         q->y <= std::max(p->y, r->y) && q->y >= std::min(p->y, r->y);
}

bool intersects(const Node* p1, const Node* q1, const Node* p2, const Node* q2) {
  const int o1 = sign(turn(p1, q1, p2));
  const int o2 = sign(turn(p1, q1, q2));
  const int o3 = sign(turn(p2, q2, p1));
  const int o4 = sign(turn(p2, q2, q1));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, q2, q1)) return true;
  if (o3 == 0 && on_segment(p2, p1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

bool point_in_triangle(double ax, double ay, double bx, double by, double cx, double cy,
                       double px, double py) {
  return (cx - px) * (ay - py) >= (ax - px) * (cy - py) &&
         (ax - px) * (by - py) >= (bx - px) * (ay - py) &&
         (bx - px) * (cy - py) >= (cx - px) * (by - py);
}

bool point_in_triangle_except_first(double ax, double ay, double bx, double by, double cx,
                                    double cy, double px, double py) {
  return !(ax == px && ay == py) && point_in_triangle(ax, ay, bx, by, cx, cy, px, py);
}

bool locally_inside(const Node* a, const Node* b) {
  return turn(a->prev, a, a->next) < 0.0
             ? turn(a, b, a->next) >= 0.0 && turn(a, a->prev, b) >= 0.0
             : turn(a, b, a->prev) < 0.0 || turn(a, a->next, b) < 0.0;
}

bool middle_inside(const Node* a, const Node* b) {
  const Node* p = a;
  bool inside = false;
  const double px = (a->x + b->x) / 2.0;
  const double py = (a->y + b->y) / 2.0;
  do {
    if (((p->y > py) != (p->next->y > py)) && p->next->y != p->y &&
        (px < (p->next->x - p->x) * (py - p->y) / (p->next->y - p->y) + p->x)) {
      inside = !inside;
    }
    p = p->next;
  } while (p != a);
  return inside;
}

bool intersects_polygon(const Node* a, const Node* b) {
  const Node* p = a;
  do {
    if (p->index != a->index && p->next->index != a->index && p->index != b->index &&
        p->next->index != b->index && intersects(p, p->next, a, b)) {
      return true;
    }
    p = p->next;
  } while (p != a);
  return false;
}

bool sector_contains_sector(const Node* m, const Node* p) {
  return turn(m->prev, m, p->prev) < 0.0 && turn(p->next, m, m->next) < 0.0;
}

bool is_valid_diagonal(const Node* a, const Node* b) {
  return a->next->index != b->index && a->prev->index != b->index && !intersects_polygon(a, b) &&
         ((locally_inside(a, b) && locally_inside(b, a) && middle_inside(a, b) &&
           (turn(a->prev, a, b->prev) != 0.0 || turn(a, b->prev, b) != 0.0)) ||
          (equals(a, b) && turn(a->prev, a, a->next) > 0.0 && turn(b->prev, b, b->next) > 0.0));
}

void remove_node(Node* p) {
  p->next->prev = p->prev;
  p->prev->next = p->next;
}

class Earcut {
 public:
  explicit Earcut(std::vector<Triangle>& out) : out_(out) {}

  void run(const PolygonWithHoles& poly) {
    std::uint32_t base = 0;
    Node* outer = linked_list(poly.outer(), base);
    base += static_cast<std::uint32_t>(poly.outer().size());
    if (outer == nullptr || outer->prev == outer->next) return;

    std::vector<Node*> queue;
    for (const auto& hole : poly.holes()) {
      Node* list = linked_list(hole, base);
      base += static_cast<std::uint32_t>(hole.size());
      if (list == nullptr) continue;
      if (list == list->next) list->steiner = true;
      queue.push_back(leftmost(list));
    }
    std::sort(queue.begin(), queue.end(), [](const Node* a, const Node* b) {
      return a->x != b->x ? a->x < b->x : a->y < b->y;
    });
    for (Node* hole : queue) outer = eliminate_hole(hole, outer);

    clip(outer, 0);
  }

 private:
  Node* create(std::uint32_t index, double x, double y) {
    nodes_.push_back(Node{index, x, y});
    return &nodes_.back();
  }

  Node* insert(std::uint32_t index, const Point2D& p, Node* last) {
    Node* n = create(index, p.x(), p.y());
    if (last == nullptr) {
      n->prev = n;
      n->next = n;
    } else {
      n->next = last->next;
      n->prev = last;
      last->next->prev = n;
      last->next = n;
    }
    return n;
  }

  // Rings arrive already oriented (outer CCW, holes CW), so link in order.
  Node* linked_list(const Ring& ring, std::uint32_t base) {
    Node* last = nullptr;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      last = insert(base + static_cast<std::uint32_t>(i), ring[i], last);
    }
    if (last != nullptr && equals(last, last->next)) {
      remove_node(last);
      last = last->next;
    }
    return last;
  }

  static Node* leftmost(Node* start) {
    Node* p = start;
    Node* best = start;
    do {
      if (p->x < best->x || (p->x == best->x && p->y < best->y)) best = p;
      p = p->next;
    } while (p != start);
    return best;
  }

  Node* filter_points(Node* start, Node* end = nullptr) {
    if (start == nullptr) return start;
    if (end == nullptr) end = start;
    Node* p = start;
    bool again;
    do {
      again = false;
      if (!p->steiner && (equals(p, p->next) || turn(p->prev, p, p->next) == 0.0)) {
        remove_node(p);
        p = end = p->prev;
        if (p == p->next) break;
        again = true;
      } else {
        p = p->next;
      }
    } while (again || p != end);
    return end;
  }

  Node* split_polygon(Node* a, Node* b) {
    Node* a2 = create(a->index, a->x, a->y);
    Node* b2 = create(b->index, b->x, b->y);
    Node* an = a->next;
    Node* bp = b->prev;

    a->next = b;
    b->prev = a;
    a2->next = an;
    an->prev = a2;
    b2->next = a2;
    a2->prev = b2;
    bp->next = b2;
    b2->prev = bp;
    return b2;
  }

  Node* find_hole_bridge(Node* hole, Node* outer) {
    Node* p = outer;
    const double hx = hole->x;
    const double hy = hole->y;
    double qx = -std::numeric_limits<double>::infinity();
    Node* m = nullptr;

    // Nearest edge to the left of the hole's leftmost point.
    do {
      if (hy <= p->y && hy >= p->next->y && p->next->y != p->y) {
        const double x = p->x + (hy - p->y) * (p->next->x - p->x) / (p->next->y - p->y);
        if (x <= hx && x > qx) {
          qx = x;
          m = p->x < p->next->x ? p : p->next;
          if (x == hx) return m;
        }
      }
      p = p->next;
    } while (p != outer);
    if (m == nullptr) return nullptr;

    // A reflex vertex inside the triangle (hole, intersection, m) would block
    // the bridge; take the one with the smallest angle to the ray instead.
    const Node* stop = m;
    const double mx = m->x;
    const double my = m->y;
    double tan_min = std::numeric_limits<double>::infinity();
    p = m;
    do {
      if (hx >= p->x && p->x >= mx && hx != p->x &&
          point_in_triangle(hy < my ? hx : qx, hy, mx, my, hy < my ? qx : hx, hy, p->x, p->y)) {
        const double tan_cur = std::abs(hy - p->y) / (hx - p->x);
        if (locally_inside(p, hole) &&
            (tan_cur < tan_min ||
             (tan_cur == tan_min && (p->x > m->x || (p->x == m->x && sector_contains_sector(m, p)))))) {
          m = p;
          tan_min = tan_cur;
        }
      }
      p = p->next;
    } while (p != stop);
    return m;
  }

  Node* eliminate_hole(Node* hole, Node* outer) {
    Node* bridge = find_hole_bridge(hole, outer);
    if (bridge == nullptr) return outer;
    Node* bridge_reverse = split_polygon(bridge, hole);
    filter_points(bridge_reverse, bridge_reverse->next);
    return filter_points(bridge, bridge->next);
  }

  bool is_ear(const Node* ear) const {
    const Node* a = ear->prev;
    const Node* b = ear;
    const Node* c = ear->next;
    if (turn(a, b, c) >= 0.0) return false;

    const double x0 = std::min({a->x, b->x, c->x});
    const double y0 = std::min({a->y, b->y, c->y});
    const double x1 = std::max({a->x, b->x, c->x});
    const double y1 = std::max({a->y, b->y, c->y});

    const Node* p = c->next;
    while (p != a) {
      if (p->x >= x0 && p->x <= x1 && p->y >= y0 && p->y <= y1 &&
          point_in_triangle_except_first(a->x, a->y, b->x, b->y, c->x, c->y, p->x, p->y) &&
          turn(p->prev, p, p->next) >= 0.0) {
        return false;
      }
      p = p->next;
    }
    return true;
  }

  void emit(const Node* a, const Node* b, const Node* c) {
    out_.push_back(Triangle{a->index, b->index, c->index});
  }

  Node* cure_local_intersections(Node* start) {
    Node* p = start;
    do {
      Node* a = p->prev;
      Node* b = p->next->next;
      if (!equals(a, b) && intersects(a, p, p->next, b) && locally_inside(a, b) &&
          locally_inside(b, a)) {
        emit(a, p, b);
        remove_node(p);
        remove_node(p->next);
        p = start = b;
      }
      p = p->next;
    } while (p != start);
    return filter_points(p);
  }

  void split_clip(Node* start) {
    Node* a = start;
    do {
      Node* b = a->next->next;
      while (b != a->prev) {
        if (a->index != b->index && is_valid_diagonal(a, b)) {
          Node* c = split_polygon(a, b);
          a = filter_points(a, a->next);
          c = filter_points(c, c->next);
          clip(a, 0);
          clip(c, 0);
          return;
        }
        b = b->next;
      }
      a = a->next;
    } while (a != start);
  }

  void clip(Node* ear, int pass) {
    if (ear == nullptr) return;
    Node* stop = ear;
    while (ear->prev != ear->next) {
      Node* prev = ear->prev;
      Node* next = ear->next;
      if (is_ear(ear)) {
        emit(prev, ear, next);
        remove_node(ear);
        // Skipping the next vertex leaves fewer slivers.
        ear = next->next;
        stop = next->next;
        continue;
      }
      ear = next;
      if (ear == stop) {
        if (pass == 0) {
          clip(filter_points(ear), 1);
        } else if (pass == 1) {
          clip(cure_local_intersections(filter_points(ear)), 2);
        } else {
          split_clip(ear);
        }
        break;
      }
    }
  }

  std::deque<Node> nodes_;
  std::vector<Triangle>& out_;
};

}  // namespace

TriangleMesh2D earcut_triangulate(const PolygonWithHoles& poly) {
  validate(poly);

  TriangleMesh2D mesh;
  mesh.vertices.reserve(poly.vertex_count());
  mesh.vertices.insert(mesh.vertices.end(), poly.outer().begin(), poly.outer().end());
  for (const auto& h : poly.holes()) mesh.vertices.insert(mesh.vertices.end(), h.begin(), h.end());

  mesh.triangles.reserve(poly.vertex_count() + 2 * poly.holes().size());
  Earcut(mesh.triangles).run(poly);
  return mesh;
}

}  // namespace geoscene::geom
