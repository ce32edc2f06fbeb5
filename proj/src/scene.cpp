#include "geoscene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "geoscene/error.hpp"
#include "geoscene/glb.hpp"
#include "geoscene/hash.hpp"

namespace geoscene::scene {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::Terrain: return "terrain";
    case ObjectKind::Water: return "water";
    case ObjectKind::Building: return "building";
    case ObjectKind::Tree: return "tree";
    case ObjectKind::VehicleTrack: return "vehicle-track";
  }
  return "unknown";
}

std::size_t SceneGraph::count(ObjectKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(objects.begin(), objects.end(), [kind](const SceneObject& o) { return o.kind == kind; }));
}

namespace {

constexpr ObjectKind kAllKinds[] = {ObjectKind::Terrain, ObjectKind::Water, ObjectKind::Building, ObjectKind::Tree,
                                    ObjectKind::VehicleTrack};

bool same_origin(const geom::GeoPoint& a, const geom::GeoPoint& b) {
  return std::abs(a.lat - b.lat) <= 1e-12 && std::abs(a.lon - b.lon) <= 1e-12;
}

geom::Rect footprint(const std::vector<Point3D>& v) {
  geom::Rect r;
  for (const auto& p : v) r.extend(Point2D(p.x(), p.y()));
  return r;
}

class Assembler {
 public:
  explicit Assembler(const SceneInputs& in) : in_(in) {
    graph_.bounds = in.bounds;
    graph_.origin = in.origin;
    graph_.seed = in.seed;
    inflated_ = in.bounds;
    inflated_.min() -= Point2D::Constant(kBoundsEpsilon);
    inflated_.max() += Point2D::Constant(kBoundsEpsilon);
  }

  template <class T>
  void check_frame(const Layer<T>& layer, const char* name, bool non_empty) {
    if (non_empty && !same_origin(layer.origin, in_.origin))
      throw Error(ErrorCode::FrameMismatch, std::string(name) + " layer uses a different scene origin");
  }

  bool admit(const std::vector<Point3D>& vertices, bool has_geometry) {
    if (!has_geometry) {
      ++graph_.counters.dropped_empty;
      return false;
    }
    const geom::Rect fp = footprint(vertices);
    for (const auto& p : vertices) {
      if (!p.allFinite()) {
        ++graph_.counters.dropped_empty;
        return false;
      }
    }
    if (!inflated_.contains(fp)) {
      ++graph_.counters.dropped_out_of_bounds;
      return false;
    }
    return true;
  }

  std::string unique(const std::string& base) {
    if (used_.insert(base).second) return base;
    ++graph_.counters.id_collisions;
    for (int k = 2;; ++k) {
      std::string id = base + "~" + std::to_string(k);
      if (used_.insert(id).second) return id;
    }
  }

  int add_mesh(MeshData m) {
    graph_.meshes.push_back(std::move(m));
    return static_cast<int>(graph_.meshes.size()) - 1;
  }

  void add_object(SceneObject o) { graph_.objects.push_back(std::move(o)); }

  int tree_mesh(const std::string& key) {
    auto it = tree_meshes_.find(key);
    if (it != tree_meshes_.end()) return it->second;
    const int idx = add_mesh(tree_model(key));
    tree_meshes_.emplace(key, idx);
    return idx;
  }

  SceneGraph& graph() { return graph_; }

 private:
  const SceneInputs& in_;
  SceneGraph graph_;
  geom::Rect inflated_;
  std::set<std::string> used_;
  std::map<std::string, int> tree_meshes_;
};

std::string fmt_mm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v * 1000.0)));
  return buf;
}

}  // namespace

SceneGraph assemble(const SceneInputs& in) {
  Assembler a(in);
  if (in.terrain) a.check_frame(*in.terrain, "terrain", true);
  a.check_frame(in.water, "water", !in.water.items.empty());
  a.check_frame(in.buildings, "buildings", !in.buildings.items.empty());
  a.check_frame(in.trees, "trees", !in.trees.items.empty());
  a.check_frame(in.tracks, "tracks", !in.tracks.items.empty());

  if (in.terrain) {
    const auto& t = in.terrain->items;
    if (a.admit(t.vertices, !t.triangles.empty())) {
      MeshData m;
      m.name = "terrain";
      m.vertices = t.vertices;
      m.triangles = t.triangles;
      if (t.vertex_classes.size() == t.vertices.size())
        for (auto c : t.vertex_classes) m.classes.push_back(static_cast<float>(c));
      SceneObject o;
      o.kind = ObjectKind::Terrain;
      o.id = a.unique("terrain");
      o.source_id = "terrain";
      o.mesh = a.add_mesh(std::move(m));
      a.add_object(std::move(o));
    }
  }

  for (const auto& w : in.water.items) {
    if (!a.admit(w.vertices, !w.triangles.empty())) continue;
    SceneObject o;
    o.kind = ObjectKind::Water;
    o.id = a.unique("water/" + std::to_string(w.body_id));
    o.source_id = std::to_string(w.body_id);
    o.class_code = landcover::kWater;
    if (!w.vertices.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", w.vertices.front().z());
      o.metadata["surface_elevation"] = buf;
    }
    MeshData m;
    m.name = o.id;
    m.vertices = w.vertices;
    m.triangles = w.triangles;
    o.mesh = a.add_mesh(std::move(m));
    a.add_object(std::move(o));
  }

  for (const auto& b : in.buildings.items) {
    if (!a.admit(b.vertices, !b.triangles.empty())) continue;
    SceneObject o;
    o.kind = ObjectKind::Building;
    o.id = a.unique("building/" + b.id);
    o.source_id = b.id;
    o.metadata = b.attributes;
    char buf[32];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", b.roof_color[0], b.roof_color[1], b.roof_color[2]);
    o.metadata["roof_color"] = buf;
    if (!b.facade_texture.empty()) o.metadata["facade_texture"] = b.facade_texture;
    MeshData m;
    m.name = o.id;
    m.vertices = b.vertices;
    m.triangles = b.triangles;
    if (b.uvs.size() == b.vertices.size()) m.uvs = b.uvs;
    o.mesh = a.add_mesh(std::move(m));
    a.add_object(std::move(o));
  }

  for (const auto& t : in.trees.items) {
    const Point3D base(t.position.x(), t.position.y(), t.elevation.value_or(0.0));
    if (!a.admit({base}, t.crown_radius > 0.0 && !t.model_key.empty())) continue;
    const std::string content = fmt_mm(base.x()) + "," + fmt_mm(base.y()) + "," + fmt_mm(base.z()) + "," +
                                fmt_mm(t.crown_radius) + "," + t.model_key;
    const std::uint64_t h = fnv1a(content, in.seed ^ 0x7ee5ULL);
    SceneObject o;
    o.kind = ObjectKind::Tree;
    o.id = a.unique("tree/" + hex64(h));
    o.source_id = t.tile.path() + "#" + std::to_string(t.component);
    o.metadata["model_key"] = t.model_key;
    o.metadata["size_class"] = vegetation::to_string(t.size_class);
    if (t.species) o.metadata["species"] = *t.species;
    o.transform.translation = base;
    // Whole degrees keep the rotation exactly reproducible in text.
    o.transform.yaw = static_cast<double>(splitmix64(h) % 360) * M_PI / 180.0;
    o.transform.scale = t.crown_radius;
    o.mesh = a.tree_mesh(t.model_key);
    a.add_object(std::move(o));
  }

  for (const auto& tr : in.tracks.items) {
    if (!a.admit(tr.points, tr.points.size() >= 2)) continue;
    SceneObject o;
    o.kind = ObjectKind::VehicleTrack;
    o.id = a.unique("track/" + tr.route_id);
    o.source_id = tr.route_id;
    if (!tr.destination.empty()) o.metadata["destination"] = tr.destination;
    MeshData m;
    m.name = o.id;
    m.vertices = tr.points;
    m.line_strip = true;
    o.mesh = a.add_mesh(std::move(m));
    a.add_object(std::move(o));
  }
  return std::move(a.graph());
}

MeshData tree_model(const std::string& model_key) {
  // Crown stretch and trunk height per size; variant picks the crown profile.
  double trunk_h = 0.9, stretch = 1.0;
  if (model_key.find("medium") != std::string::npos) trunk_h = 1.1, stretch = 1.15;
  if (model_key.find("large") != std::string::npos) trunk_h = 1.3, stretch = 1.3;
  int variant = 0;
  if (!model_key.empty() && std::isdigit(static_cast<unsigned char>(model_key.back())))
    variant = model_key.back() - '0';

  MeshData m;
  m.name = model_key;
  constexpr int kSeg = 8;
  constexpr double kTrunkR = 0.12;
  auto ring = [&](double r, double z) {
    const auto first = static_cast<std::uint32_t>(m.vertices.size());
    for (int i = 0; i < kSeg; ++i) {
      const double a = 2.0 * M_PI * i / kSeg;
      m.vertices.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
    return first;
  };
  auto band = [&](std::uint32_t lo, std::uint32_t hi) {
    for (std::uint32_t i = 0; i < kSeg; ++i) {
      const std::uint32_t j = (i + 1) % kSeg;
      m.triangles.push_back({lo + i, lo + j, hi + j});
      m.triangles.push_back({lo + i, hi + j, hi + i});
    }
  };
  auto cap = [&](std::uint32_t r, const Point3D& apex, bool up) {
    const auto c = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.push_back(apex);
    for (std::uint32_t i = 0; i < kSeg; ++i) {
      const std::uint32_t j = (i + 1) % kSeg;
      if (up) m.triangles.push_back({r + i, r + j, c});
      else m.triangles.push_back({r + j, r + i, c});
    }
  };

  const std::uint32_t t0 = ring(kTrunkR, 0.0);
  const std::uint32_t t1 = ring(kTrunkR, trunk_h);
  band(t0, t1);
  cap(t0, Point3D(0, 0, 0), false);
  cap(t1, Point3D(0, 0, trunk_h), true);

  // Crown profile: radius at fractions of the crown height.
  static const std::vector<std::vector<double>> profiles = {
      {0.55, 0.95, 1.0, 0.8},  // round
      {1.0, 0.75, 0.45, 0.2},  // conical
      {0.7, 1.0, 0.9, 0.5},    // ovoid
  };
  const auto& prof = profiles[static_cast<std::size_t>(variant) % profiles.size()];
  const double crown_h = 2.0 * stretch;
  std::uint32_t prev = 0;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    const double z = trunk_h + crown_h * static_cast<double>(k) / static_cast<double>(prof.size());
    const std::uint32_t r = ring(prof[k], z);
    if (k == 0) cap(r, Point3D(0, 0, trunk_h), false);
    else band(prev, r);
    prev = r;
  }
  cap(prev, Point3D(0, 0, trunk_h + crown_h), true);
  return m;
}

namespace {

json quat_z(double yaw) {
  return json::array({0.0, 0.0, std::sin(yaw / 2.0), std::cos(yaw / 2.0)});
}

int write_mesh(json& gltf, std::string& bin, const MeshData& m, int material) {
  std::vector<float> pos;
  pos.reserve(m.vertices.size() * 3);
  std::array<float, 3> lo{}, hi{};
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const auto f = static_cast<float>(m.vertices[i][k]);
      pos.push_back(f);
      lo[k] = i == 0 ? f : std::min(lo[k], f);
      hi[k] = i == 0 ? f : std::max(hi[k], f);
    }
  }
  json attrs = json::object();
  attrs["POSITION"] = glb::append_accessor(gltf, bin, pos.data(), pos.size() * 4, glb::kFloat, m.vertices.size(),
                                           "VEC3", json::array({lo[0], lo[1], lo[2]}),
                                           json::array({hi[0], hi[1], hi[2]}), 34962);
  if (!m.uvs.empty()) {
    std::vector<float> uv;
    for (const auto& t : m.uvs) {
      uv.push_back(static_cast<float>(t.x()));
      uv.push_back(static_cast<float>(t.y()));
    }
    attrs["TEXCOORD_0"] =
        glb::append_accessor(gltf, bin, uv.data(), uv.size() * 4, glb::kFloat, m.uvs.size(), "VEC2", nullptr, nullptr, 34962);
  }
  if (!m.classes.empty()) {
    attrs["_CLASS"] = glb::append_accessor(gltf, bin, m.classes.data(), m.classes.size() * 4, glb::kFloat,
                                           m.classes.size(), "SCALAR", nullptr, nullptr, 34962);
  }
  json prim = {{"attributes", attrs}, {"material", material}};
  if (m.line_strip) {
    prim["mode"] = 3;
  } else {
    std::vector<std::uint32_t> idx;
    idx.reserve(m.triangles.size() * 3);
    for (const auto& t : m.triangles) idx.insert(idx.end(), t.begin(), t.end());
    prim["indices"] = glb::append_accessor(gltf, bin, idx.data(), idx.size() * 4, glb::kUnsignedInt, idx.size(),
                                           "SCALAR", nullptr, nullptr, 34963);
    prim["mode"] = 4;
  }
  gltf["meshes"].push_back({{"name", m.name}, {"primitives", json::array({prim})}});
  return static_cast<int>(gltf["meshes"].size()) - 1;
}

int material_for(ObjectKind k) {
  switch (k) {
    case ObjectKind::Terrain: return 0;
    case ObjectKind::Water: return 1;
    case ObjectKind::Building: return 2;
    case ObjectKind::Tree: return 3;
    case ObjectKind::VehicleTrack: return 4;
  }
  return 0;
}

json material(const char* name, double r, double g, double b, double a = 1.0) {
  json m = {{"name", name},
            {"pbrMetallicRoughness",
             {{"baseColorFactor", json::array({r, g, b, a})}, {"metallicFactor", 0.0}, {"roughnessFactor", 0.9}}}};
  if (a < 1.0) m["alphaMode"] = "BLEND";
  return m;
}

}  // namespace

std::string export_glb(const SceneGraph& scene) {
  json gltf;
  std::string bin;
  try {
    gltf["asset"] = {{"version", "2.0"}, {"generator", "geoscene"}};
    gltf["materials"] = json::array({material("terrain", 0.45, 0.5, 0.35), material("water", 0.2, 0.35, 0.55, 0.85),
                                     material("building", 0.75, 0.72, 0.68), material("tree", 0.25, 0.45, 0.2),
                                     material("vehicle-track", 0.9, 0.2, 0.2)});
    gltf["meshes"] = json::array();
    std::vector<int> gltf_mesh(scene.meshes.size(), -1);
    json nodes = json::array();
    json root = {{"name", "scene_root"},
                 {"rotation", json::array({-std::sqrt(0.5), 0.0, 0.0, std::sqrt(0.5)})},
                 {"extras", {{"up_axis", "Z"}, {"units", "m"}}}};
    json children = json::array();
    nodes.push_back(nullptr);  // root, filled below
    for (const auto& o : scene.objects) {
      if (o.mesh < 0 || o.mesh >= static_cast<int>(scene.meshes.size()))
        throw Error(ErrorCode::SerializationError, "object " + o.id + " has no geometry");
      const auto mi = static_cast<std::size_t>(o.mesh);
      if (gltf_mesh[mi] < 0) gltf_mesh[mi] = write_mesh(gltf, bin, scene.meshes[mi], material_for(o.kind));
      json extras = {{"kind", std::string(to_string(o.kind))},
                     {"source_id", o.source_id},
                     {"class_code", o.class_code ? json(*o.class_code) : json(nullptr)}};
      if (!o.metadata.empty()) extras["metadata"] = o.metadata;
      json node = {{"name", o.id}, {"mesh", gltf_mesh[mi]}, {"extras", extras}};
      if (!o.transform.identity()) {
        const auto& t = o.transform.translation;
        if (!t.allFinite() || !std::isfinite(o.transform.yaw) || !std::isfinite(o.transform.scale))
          throw Error(ErrorCode::SerializationError, "object " + o.id + " has a non-finite transform");
        node["translation"] = json::array({t.x(), t.y(), t.z()});
        if (o.transform.yaw != 0.0) node["rotation"] = quat_z(o.transform.yaw);
        if (o.transform.scale != 1.0)
          node["scale"] = json::array({o.transform.scale, o.transform.scale, o.transform.scale});
      }
      children.push_back(nodes.size());
      nodes.push_back(std::move(node));
    }
    if (!children.empty()) root["children"] = children;
    nodes[0] = std::move(root);
    gltf["nodes"] = std::move(nodes);
    gltf["scene"] = 0;
    gltf["scenes"] = json::array({{{"name", "geoscene"}, {"nodes", json::array({0})}}});
    if (gltf["meshes"].empty()) gltf.erase("meshes");
    if (!bin.empty()) {
      while (bin.size() % 4) bin += '\0';
      gltf["buffers"] = json::array({{{"byteLength", bin.size()}}});
    }
    return glb::write(gltf, bin);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SerializationError, std::string("glb export: ") + e.what());
  }
}

std::string export_manifest(const SceneGraph& scene, const ordered_json& parameters) {
  ordered_json m;
  m["format"] = "geoscene-manifest/1";
  m["origin"] = {{"lat", scene.origin.lat}, {"lon", scene.origin.lon}};
  m["bounds"] = {{"min_x", scene.bounds.min().x()},
                 {"min_y", scene.bounds.min().y()},
                 {"max_x", scene.bounds.max().x()},
                 {"max_y", scene.bounds.max().y()}};
  m["seed"] = scene.seed;
  m["convention"] = {{"units", "m"}, {"up", "+Z"}, {"handedness", "right"},
                     {"glb_root", "rotates Z-up to Y-up"}};
  ordered_json counts = ordered_json::object();
  for (auto k : kAllKinds) counts[std::string(to_string(k))] = scene.count(k);
  m["counts"] = counts;
  m["objects"] = scene.objects.size();
  m["meshes"] = scene.meshes.size();
  m["dropped"] = {{"empty", scene.counters.dropped_empty}, {"out_of_bounds", scene.counters.dropped_out_of_bounds}};
  m["warnings"] = {{"id_collisions", scene.counters.id_collisions}};
  m["parameters"] = parameters;
  return m.dump(2) + "\n";
}

std::vector<NodeRecord> read_back(std::string_view bytes) {
  const glb::Glb g = glb::parse(bytes);
  std::vector<NodeRecord> out;
  try {
    const auto& nodes = g.json.at("nodes");
    const auto& root = nodes.at(g.json.at("scenes").at(g.json.value("scene", 0)).at("nodes").at(0).get<int>());
    if (!root.contains("children")) return out;
    for (const auto& ci : root.at("children")) {
      const auto& n = nodes.at(ci.get<int>());
      NodeRecord r;
      r.id = n.at("name").get<std::string>();
      const auto& ex = n.at("extras");
      r.kind = ex.at("kind").get<std::string>();
      r.source_id = ex.at("source_id").get<std::string>();
      r.class_code = ex.at("class_code");
      r.mesh = n.at("mesh").get<int>();
      const auto& prim = g.json.at("meshes").at(r.mesh).at("primitives").at(0);
      r.vertex_count = g.json.at("accessors").at(prim.at("attributes").at("POSITION").get<int>()).at("count");
      if (prim.contains("indices"))
        r.triangle_count = g.json.at("accessors").at(prim.at("indices").get<int>()).at("count").get<std::size_t>() / 3;
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("scene read-back: ") + e.what());
  }
  return out;
}

}  // namespace geoscene::scene
