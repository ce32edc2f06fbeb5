#include "geoscene/buildings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <set>

#include "geoscene/error.hpp"
#include "geoscene/glb.hpp"
#include "geoscene/hash.hpp"

namespace geoscene::buildings {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, ErrorCode code, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(code, std::string(what) + ": " + e.what());
  }
}

Eigen::Affine3d column_major(const json& m) {
  if (!m.is_array() || m.size() != 16) throw Error(ErrorCode::DecodeError, "transform must have 16 numbers");
  Eigen::Matrix4d mat;
  for (int c = 0; c < 4; ++c) {
    for (int r = 0; r < 4; ++r) mat(r, c) = m[c * 4 + r].get<double>();
  }
  return Eigen::Affine3d(mat);
}

}  // namespace

// -- tileset -------------------------------------------------------------------------

TilesetIndex parse_tileset(std::string_view json_text, const TilesetFrame& frame) {
  const json doc = parse_json(json_text, ErrorCode::DecodeError, "tileset");
  if (!doc.is_object() || !doc.contains("root") || !doc["root"].is_object()) {
    throw Error(ErrorCode::DecodeError, "tileset: missing root");
  }
  TilesetIndex index;
  const Eigen::Affine3d shift(Eigen::Translation3d(frame.offset));

  std::function<int(const json&, const Eigen::Affine3d&, int)> visit = [&](const json& j, const Eigen::Affine3d& parent, int depth) {
    if (depth > 64) throw Error(ErrorCode::DecodeError, "tileset: nesting too deep");
    Eigen::Affine3d local = parent;
    if (j.contains("transform")) local = parent * column_major(j["transform"]);

    TilesetNode node;
    node.transform = shift * local;
    const json& bv = j.value("boundingVolume", json::object());
    Eigen::AlignedBox3d box;
    try {
      if (bv.contains("box")) {
        const auto& b = bv["box"];
        if (!b.is_array() || b.size() != 12) throw Error(ErrorCode::DecodeError, "tileset: box needs 12 numbers");
        const Eigen::Vector3d c(b[0].get<double>(), b[1].get<double>(), b[2].get<double>());
        const Eigen::Vector3d ax(b[3].get<double>(), b[4].get<double>(), b[5].get<double>());
        const Eigen::Vector3d ay(b[6].get<double>(), b[7].get<double>(), b[8].get<double>());
        const Eigen::Vector3d az(b[9].get<double>(), b[10].get<double>(), b[11].get<double>());
        for (int k = 0; k < 8; ++k) {
          const Eigen::Vector3d corner = c + ((k & 1) ? ax : -ax) + ((k & 2) ? ay : -ay) + ((k & 4) ? az : -az);
          box.extend(node.transform * corner);
        }
      } else if (bv.contains("region")) {
        const auto& r = bv["region"];
        if (!r.is_array() || r.size() != 6) throw Error(ErrorCode::DecodeError, "tileset: region needs 6 numbers");
        const double deg = 180.0 / std::numbers::pi;
        const auto lo = geom::project_unchecked({r[1].get<double>() * deg, r[0].get<double>() * deg}, frame.scene_origin);
        const auto hi = geom::project_unchecked({r[3].get<double>() * deg, r[2].get<double>() * deg}, frame.scene_origin);
        box.extend(Eigen::Vector3d(lo.x(), lo.y(), r[4].get<double>()));
        box.extend(Eigen::Vector3d(hi.x(), hi.y(), r[5].get<double>()));
      } else if (bv.contains("sphere")) {
        const auto& s = bv["sphere"];
        if (!s.is_array() || s.size() != 4) throw Error(ErrorCode::DecodeError, "tileset: sphere needs 4 numbers");
        const Eigen::Vector3d c = node.transform * Eigen::Vector3d(s[0].get<double>(), s[1].get<double>(), s[2].get<double>());
        const double radius = s[3].get<double>() * node.transform.linear().norm() / std::sqrt(3.0);
        box.extend(c - Eigen::Vector3d::Constant(radius));
        box.extend(c + Eigen::Vector3d::Constant(radius));
      } else {
        throw Error(ErrorCode::DecodeError, "tileset: node without bounding volume");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::DecodeError, std::string("tileset: ") + e.what());
    }
    node.footprint = geom::Rect(box.min().head<2>(), box.max().head<2>());
    node.min_z = box.min().z();
    node.max_z = box.max().z();
    if (j.contains("content")) {
      const auto& c = j["content"];
      if (c.contains("uri")) node.content_uri = c["uri"].get<std::string>();
      else if (c.contains("url")) node.content_uri = c["url"].get<std::string>();
      else throw Error(ErrorCode::DecodeError, "tileset: content without uri");
    }
    const int id = static_cast<int>(index.nodes.size());
    index.nodes.push_back(node);
    if (j.contains("children")) {
      if (!j["children"].is_array()) throw Error(ErrorCode::DecodeError, "tileset: children must be an array");
      for (const auto& child : j["children"]) {
        const int cid = visit(child, local, depth + 1);
        index.nodes[id].children.push_back(cid);
      }
    }
    return id;
  };
  visit(doc["root"], Eigen::Affine3d::Identity(), 0);

  for (const auto& n : index.nodes) {
    const double tol = 1e-6 * (1.0 + n.footprint.sizes().maxCoeff());
    geom::Rect grown(n.footprint.min() - geom::Point2D::Constant(tol), n.footprint.max() + geom::Point2D::Constant(tol));
    for (int c : n.children) {
      if (!grown.contains(index.nodes[c].footprint)) {
        throw Error(ErrorCode::DecodeError, "tileset: child volume extends beyond its parent");
      }
    }
  }
  return index;
}

std::vector<ContentRef> select_contents(const TilesetIndex& index, const geom::Rect& region) {
  std::vector<ContentRef> out;
  if (index.nodes.empty()) return out;
  std::function<void(int)> visit = [&](int id) {
    const auto& n = index.nodes[id];
    const geom::Rect overlap = n.footprint.intersection(region);
    if (overlap.isEmpty() || (overlap.sizes().array() <= 0.0).any()) return;
    if (n.content_uri) out.push_back({*n.content_uri, n.transform, n.footprint});
    for (int c : n.children) visit(c);
  };
  visit(0);
  return out;
}

// -- b3dm ---------------------------------------------------------------------------------

std::size_t B3dmPayload::batch_length() const {
  if (!feature_table.contains("BATCH_LENGTH") || !feature_table["BATCH_LENGTH"].is_number_unsigned()) {
    throw Error(ErrorCode::MalformedTable, "feature table lacks BATCH_LENGTH");
  }
  return feature_table["BATCH_LENGTH"].get<std::size_t>();
}

namespace {

std::uint32_t u32_at(std::string_view b, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

std::size_t binary_component_size(const std::string& t) {
  if (t == "BYTE" || t == "UNSIGNED_BYTE") return 1;
  if (t == "SHORT" || t == "UNSIGNED_SHORT") return 2;
  if (t == "INT" || t == "UNSIGNED_INT" || t == "FLOAT") return 4;
  if (t == "DOUBLE") return 8;
  throw Error(ErrorCode::MalformedTable, "unknown componentType " + t);
}

std::size_t binary_type_count(const std::string& t) {
  if (t == "SCALAR") return 1;
  if (t == "VEC2") return 2;
  if (t == "VEC3") return 3;
  if (t == "VEC4") return 4;
  throw Error(ErrorCode::MalformedTable, "unknown type " + t);
}

double binary_value(const char* p, const std::string& ct) {
  if (ct == "BYTE") return *reinterpret_cast<const std::int8_t*>(p);
  if (ct == "UNSIGNED_BYTE") return *reinterpret_cast<const std::uint8_t*>(p);
  if (ct == "SHORT") { std::int16_t v; std::memcpy(&v, p, 2); return v; }
  if (ct == "UNSIGNED_SHORT") { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
  if (ct == "INT") { std::int32_t v; std::memcpy(&v, p, 4); return v; }
  if (ct == "UNSIGNED_INT") { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
  if (ct == "FLOAT") { float v; std::memcpy(&v, p, 4); return v; }
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

// Numbers of a binary-body reference {byteOffset, componentType, type}.
std::vector<double> binary_values(const json& ref, std::string_view body, std::size_t count,
                                  const std::string& default_ctype = "FLOAT", const std::string& default_type = "SCALAR") {
  const std::string ct = ref.value("componentType", default_ctype);
  const std::string type = ref.value("type", default_type);
  const std::size_t cs = binary_component_size(ct), nc = binary_type_count(type);
  const std::size_t off = ref.value("byteOffset", std::size_t{0});
  if (off + count * nc * cs > body.size()) throw Error(ErrorCode::MalformedTable, "binary reference outside the table body");
  std::vector<double> out(count * nc);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = binary_value(body.data() + off + i * cs, ct);
  return out;
}

bool is_binary_ref(const json& v) { return v.is_object() && v.contains("byteOffset"); }

std::string format_number(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string format_double(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return json(v).dump();
}

void validate_batch_table(const B3dmPayload& p) {
  if (!p.batch_table.is_object()) throw Error(ErrorCode::MalformedTable, "batch table must be an object");
  const std::size_t n = p.batch_length();
  for (const auto& [name, col] : p.batch_table.items()) {
    if (name == "extensions" || name == "extras") continue;
    if (col.is_array()) {
      if (col.size() != n) {
        throw Error(ErrorCode::MalformedTable, "batch column '" + name + "' has " + std::to_string(col.size()) +
                                                   " entries, expected " + std::to_string(n));
      }
    } else if (is_binary_ref(col)) {
      if (!col.contains("componentType") || !col.contains("type")) {
        throw Error(ErrorCode::MalformedTable, "binary batch column '" + name + "' lacks componentType/type");
      }
      binary_values(col, p.batch_table_binary, n, "", "");
    } else {
      throw Error(ErrorCode::MalformedTable, "batch column '" + name + "' is neither array nor binary reference");
    }
  }
}

std::string padded_json(const json& j, std::size_t start) {
  if (j.is_object() && j.empty()) return {};
  std::string s = j.dump();
  while ((start + s.size()) % 8) s += ' ';
  return s;
}

std::string padded_binary(const std::string& b) {
  std::string s = b;
  while (s.size() % 8) s += '\0';
  return s;
}

}  // namespace

B3dmPayload parse_b3dm(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "b3dm") throw Error(ErrorCode::BadMagic, "not a b3dm container");
  if (bytes.size() < 28) throw Error(ErrorCode::LengthMismatch, "b3dm shorter than its header");
  if (u32_at(bytes, 4) != 1) throw Error(ErrorCode::UnsupportedVersion, "b3dm version " + std::to_string(u32_at(bytes, 4)));
  if (u32_at(bytes, 8) != bytes.size()) {
    throw Error(ErrorCode::LengthMismatch, "b3dm byteLength " + std::to_string(u32_at(bytes, 8)) + " but " +
                                               std::to_string(bytes.size()) + " bytes present");
  }
  const std::size_t ftj = u32_at(bytes, 12), ftb = u32_at(bytes, 16), btj = u32_at(bytes, 20), btb = u32_at(bytes, 24);
  if (28 + ftj + ftb + btj + btb > bytes.size()) throw Error(ErrorCode::LengthMismatch, "b3dm table lengths exceed the file");

  B3dmPayload p;
  std::size_t at = 28;
  auto section_json = [&](std::size_t len, const char* what) {
    const std::string_view s = bytes.substr(at, len);
    at += len;
    if (s.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
    json j = parse_json(s, ErrorCode::MalformedTable, what);
    if (!j.is_object()) throw Error(ErrorCode::MalformedTable, std::string(what) + " must be an object");
    return j;
  };
  p.feature_table = section_json(ftj, "feature table");
  p.feature_table_binary.assign(bytes.substr(at, ftb));
  at += ftb;
  p.batch_table = section_json(btj, "batch table");
  p.batch_table_binary.assign(bytes.substr(at, btb));
  at += btb;
  p.glb.assign(bytes.substr(at));
  validate_batch_table(p);
  return p;
}

std::string write_b3dm(const B3dmPayload& p) {
  const std::string ftj = padded_json(p.feature_table, 28);
  const std::string ftb = padded_binary(p.feature_table_binary);
  const std::string btj = padded_json(p.batch_table, 28 + ftj.size() + ftb.size());
  const std::string btb = padded_binary(p.batch_table_binary);
  const std::size_t total = 28 + ftj.size() + ftb.size() + btj.size() + btb.size() + p.glb.size();
  std::string out = "b3dm";
  for (std::uint32_t v : {std::uint32_t{1}, static_cast<std::uint32_t>(total), static_cast<std::uint32_t>(ftj.size()),
                          static_cast<std::uint32_t>(ftb.size()), static_cast<std::uint32_t>(btj.size()),
                          static_cast<std::uint32_t>(btb.size())}) {
    out.append(reinterpret_cast<const char*>(&v), 4);
  }
  out += ftj;
  out += ftb;
  out += btj;
  out += btb;
  out += p.glb;
  return out;
}

std::vector<std::string> batch_column(const B3dmPayload& payload, const std::string& name) {
  if (!payload.batch_table.contains(name)) throw Error(ErrorCode::MalformedTable, "batch table has no column '" + name + "'");
  const std::size_t n = payload.batch_length();
  const json& col = payload.batch_table[name];
  std::vector<std::string> out;
  if (col.is_array()) {
    if (col.size() != n) throw Error(ErrorCode::MalformedTable, "batch column '" + name + "' length mismatch");
    for (const auto& v : col) out.push_back(format_number(v));
  } else if (is_binary_ref(col)) {
    const auto values = binary_values(col, payload.batch_table_binary, n);
    const std::size_t per = values.size() / std::max<std::size_t>(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::string s;
      for (std::size_t k = 0; k < per; ++k) s += (k ? " " : "") + format_double(values[i * per + k]);
      out.push_back(s);
    }
  } else {
    throw Error(ErrorCode::MalformedTable, "batch column '" + name + "' malformed");
  }
  return out;
}

// -- split ------------------------------------------------------------------------------

geom::Rect BuildingMesh::footprint() const {
  geom::Rect r;
  for (const auto& v : vertices) r.extend(Point2D(v.x(), v.y()));
  return r;
}

namespace {

Eigen::Affine3d node_matrix(const json& node) {
  if (node.contains("matrix")) return column_major(node["matrix"]);
  Eigen::Affine3d m = Eigen::Affine3d::Identity();
  if (node.contains("translation")) {
    const auto& t = node["translation"];
    m.translate(Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>()));
  }
  if (node.contains("rotation")) {
    const auto& q = node["rotation"];  // glTF order x, y, z, w
    m.rotate(Eigen::Quaterniond(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(), q[2].get<double>()).normalized());
  }
  if (node.contains("scale")) {
    const auto& s = node["scale"];
    m.scale(Eigen::Vector3d(s[0].get<double>(), s[1].get<double>(), s[2].get<double>()));
  }
  return m;
}

}  // namespace

std::vector<BuildingMesh> split_by_batch(const B3dmPayload& payload, const SplitOptions& options) {
  const glb::Glb model = glb::parse(payload.glb);
  const json& j = model.json;
  for (const char* list : {"extensionsUsed", "extensionsRequired"}) {
    if (!j.contains(list)) continue;
    for (const auto& e : j[list]) {
      const auto name = e.get<std::string>();
      if (name == "KHR_draco_mesh_compression" || name == "EXT_meshopt_compression" || std::string(list) == "extensionsRequired") {
        throw Error(ErrorCode::UnsupportedFeature, "glb extension " + name);
      }
    }
  }
  if (j.contains("animations") && !j["animations"].empty()) throw Error(ErrorCode::UnsupportedFeature, "glb animations");

  Eigen::Vector3d rtc = Eigen::Vector3d::Zero();
  if (payload.feature_table.contains("RTC_CENTER")) {
    const json& c = payload.feature_table["RTC_CENTER"];
    if (c.is_array() && c.size() == 3) {
      rtc = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    } else if (is_binary_ref(c)) {
      const auto v = binary_values(c, payload.feature_table_binary, 1, "FLOAT", "VEC3");
      rtc = {v[0], v[1], v[2]};
    } else {
      throw Error(ErrorCode::MalformedTable, "RTC_CENTER malformed");
    }
  }
  const std::size_t batch_count = payload.batch_length();

  // (mesh index, node matrix) pairs from the default scene.
  std::vector<std::pair<int, Eigen::Affine3d>> instances;
  try {
    if (j.contains("scenes") && !j["scenes"].empty()) {
      const int scene = j.value("scene", 0);
      std::function<void(int, const Eigen::Affine3d&, int)> walk = [&](int n, const Eigen::Affine3d& parent, int depth) {
        if (depth > 64) throw Error(ErrorCode::DecodeError, "glb: node cycle");
        const json& node = j.at("nodes").at(n);
        const Eigen::Affine3d m = parent * node_matrix(node);
        if (node.contains("mesh")) instances.emplace_back(node["mesh"].get<int>(), m);
        for (const auto& c : node.value("children", json::array())) walk(c.get<int>(), m, depth + 1);
      };
      for (const auto& n : j.at("scenes").at(scene).value("nodes", json::array())) walk(n.get<int>(), Eigen::Affine3d::Identity(), 0);
    } else {
      for (std::size_t m = 0; m < j.value("meshes", json::array()).size(); ++m) {
        instances.emplace_back(static_cast<int>(m), Eigen::Affine3d::Identity());
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("glb: ") + e.what());
  }

  // Y-up glTF -> Z-up scene: (x, y, z) -> (x, -z, y).
  Eigen::Matrix3d y_to_z;
  y_to_z << 1, 0, 0, 0, 0, -1, 0, 1, 0;

  std::map<int, BuildingMesh> by_batch;
  for (const auto& [mesh_index, matrix] : instances) {
    const json& mesh = j.at("meshes").at(mesh_index);
    for (const auto& prim : mesh.at("primitives")) {
      if (prim.value("mode", 4) != 4) throw Error(ErrorCode::UnsupportedFeature, "glb: non-triangle primitive");
      if (prim.contains("extensions") && prim["extensions"].contains("KHR_draco_mesh_compression")) {
        throw Error(ErrorCode::UnsupportedFeature, "glb: draco-compressed primitive");
      }
      const json& attrs = prim.at("attributes");
      if (!attrs.contains("POSITION")) throw Error(ErrorCode::DecodeError, "glb: primitive without POSITION");
      int ncomp = 0;
      const auto pos = glb::read_accessor(model, attrs["POSITION"].get<int>(), &ncomp);
      if (ncomp != 3) throw Error(ErrorCode::DecodeError, "glb: POSITION must be VEC3");
      const std::size_t nv = pos.size() / 3;
      int batch_attr = -1;
      for (const char* name : {"_BATCHID", "BATCHID", "_FEATURE_ID_0"}) {
        if (attrs.contains(name)) {
          batch_attr = attrs[name].get<int>();
          break;
        }
      }
      if (batch_attr < 0) throw Error(ErrorCode::MissingBatchId, "primitive has no batch id attribute");
      const auto ids = glb::read_accessor(model, batch_attr);
      if (ids.size() != nv) throw Error(ErrorCode::MissingBatchId, "batch id count differs from vertex count");

      std::vector<std::uint32_t> indices;
      if (prim.contains("indices")) {
        for (double v : glb::read_accessor(model, prim["indices"].get<int>())) indices.push_back(static_cast<std::uint32_t>(v));
      } else {
        for (std::size_t i = 0; i < nv; ++i) indices.push_back(static_cast<std::uint32_t>(i));
      }
      if (indices.size() % 3) throw Error(ErrorCode::DecodeError, "glb: index count not a multiple of 3");

      // Every vertex goes to its batch, referenced or not.
      std::vector<std::uint32_t> local(nv);
      std::vector<int> batch_of(nv);
      for (std::size_t v = 0; v < nv; ++v) {
        const int b = static_cast<int>(std::lround(ids[v]));
        if (b < 0 || static_cast<std::size_t>(b) >= batch_count) {
          throw Error(ErrorCode::MalformedTable, "batch id " + std::to_string(b) + " outside the batch table");
        }
        batch_of[v] = b;
        BuildingMesh& m = by_batch[b];
        local[v] = static_cast<std::uint32_t>(m.vertices.size());
        const Eigen::Vector3d p = options.transform * (y_to_z * (matrix * Eigen::Vector3d(pos[3 * v], pos[3 * v + 1], pos[3 * v + 2])) + rtc);
        m.vertices.push_back(p);
      }
      for (std::size_t t = 0; t < indices.size(); t += 3) {
        const std::uint32_t a = indices[t], b = indices[t + 1], c = indices[t + 2];
        if (a >= nv || b >= nv || c >= nv) throw Error(ErrorCode::DecodeError, "glb: index out of range");
        if (batch_of[a] != batch_of[b] || batch_of[a] != batch_of[c]) {
          throw Error(ErrorCode::InconsistentBatch, "triangle spans batch ids " + std::to_string(batch_of[a]) + ", " +
                                                        std::to_string(batch_of[b]) + ", " + std::to_string(batch_of[c]));
        }
        // A negative-determinant node transform flips winding.
        const bool flip = matrix.linear().determinant() < 0;
        by_batch[batch_of[a]].triangles.push_back(flip ? geom::Triangle{local[a], local[c], local[b]}
                                                       : geom::Triangle{local[a], local[b], local[c]});
      }
    }
  }

  std::vector<std::string> ids;
  if (!options.id_column.empty()) ids = batch_column(payload, options.id_column);
  std::vector<std::pair<std::string, std::vector<std::string>>> columns;
  for (const auto& [name, col] : payload.batch_table.items()) {
    if (name == "extensions" || name == "extras" || name == options.id_column) continue;
    columns.emplace_back(name, batch_column(payload, name));
  }

  std::vector<BuildingMesh> out;
  for (auto& [b, m] : by_batch) {
    m.id = options.id_column.empty() ? std::to_string(b) : ids[b];
    for (const auto& [name, values] : columns) m.attributes[name] = values[b];
    out.push_back(std::move(m));
  }
  return out;
}

// -- UV mapping ---------------------------------------------------------------------------

BuildingMesh compute_uv(const BuildingMesh& mesh, double texel_density, std::vector<FacadeFrame>* frames) {
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const double roof_cos = std::cos(kRoofAngleDeg * std::numbers::pi / 180.0);

  struct Face {
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // area-weighted
    Eigen::Vector3d unit;
    double offset = 0.0;
    std::vector<std::size_t> triangles;
  };
  std::vector<Face> faces;
  std::vector<std::size_t> face_of(mesh.triangles.size());

  double scale = 1.0;
  for (const auto& v : mesh.vertices) scale = std::max(scale, v.cwiseAbs().maxCoeff());

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector3d& a = mesh.vertices[tri[0]];
    const Eigen::Vector3d n = (mesh.vertices[tri[1]] - a).cross(mesh.vertices[tri[2]] - a);
    const double len = n.norm();
    if (!(len > 1e-12 * scale * scale)) {
      throw Error(ErrorCode::DegenerateFace, "zero-area triangle " + std::to_string(t) + " in building " + mesh.id);
    }
    const Eigen::Vector3d unit = n / len;
    const double d = unit.dot(a);
    std::size_t f = 0;
    for (; f < faces.size(); ++f) {
      if (faces[f].unit.dot(unit) > 1.0 - 1e-9 && std::abs(faces[f].offset - d) <= 1e-6 * (1.0 + std::abs(d))) break;
    }
    if (f == faces.size()) faces.push_back({Eigen::Vector3d::Zero(), unit, d, {}});
    faces[f].normal += n;
    faces[f].triangles.push_back(t);
    face_of[t] = f;
  }

  BuildingMesh out;
  out.id = mesh.id;
  out.attributes = mesh.attributes;
  out.roof_color = mesh.roof_color;
  out.facade_texture = mesh.facade_texture;
  out.triangles.resize(mesh.triangles.size());
  if (frames) frames->clear();

  for (const Face& face : faces) {
    const Eigen::Vector3d n = face.normal.normalized();
    const double vertical = n.dot(up);
    Eigen::Vector3d h, v;
    const bool horizontal = std::abs(vertical) > roof_cos;
    if (!horizontal) {
      h = up.cross(n).normalized();
      v = n.cross(h);
    } else {
      // u follows the longest boundary edge (direction taken mod 180 degrees).
      std::map<std::pair<std::array<double, 3>, std::array<double, 3>>, int> edges;
      auto key = [](const Eigen::Vector3d& p) { return std::array<double, 3>{p.x(), p.y(), p.z()}; };
      for (std::size_t t : face.triangles) {
        for (int k = 0; k < 3; ++k) {
          auto a = key(mesh.vertices[mesh.triangles[t][k]]);
          auto b = key(mesh.vertices[mesh.triangles[t][(k + 1) % 3]]);
          if (b < a) std::swap(a, b);
          ++edges[{a, b}];
        }
      }
      double best_len = -1.0, phi = 0.0;
      for (const auto& [e, count] : edges) {
        if (count != 1) continue;
        const double dx = e.second[0] - e.first[0], dy = e.second[1] - e.first[1];
        const double len = std::hypot(dx, dy);
        if (len > best_len * (1.0 + 1e-9)) {
          best_len = len;
          double ang = std::fmod(std::atan2(dy, dx), std::numbers::pi);
          if (ang < 0) ang += std::numbers::pi;
          if (std::numbers::pi - ang < 1e-12) ang = 0.0;
          phi = ang;
        }
      }
      const Eigen::Vector3d axis(std::cos(phi), std::sin(phi), 0.0);
      h = (axis - axis.dot(n) * n).normalized();
      v = n.cross(h);
    }
    const bool roof = horizontal && vertical > 0;

    std::map<std::uint32_t, std::uint32_t> remap;
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    const std::size_t first_vertex = out.vertices.size();
    for (std::size_t t : face.triangles) {
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t old = mesh.triangles[t][k];
        auto [it, inserted] = remap.try_emplace(old, static_cast<std::uint32_t>(out.vertices.size()));
        if (inserted) {
          const Eigen::Vector3d& p = mesh.vertices[old];
          out.vertices.push_back(p);
          const double pu = p.dot(h), pv = p.dot(v);
          out.uvs.emplace_back(pu, pv);
          umin = std::min(umin, pu), umax = std::max(umax, pu);
          vmin = std::min(vmin, pv), vmax = std::max(vmax, pv);
        }
        out.triangles[t][k] = it->second;
      }
      if (roof) out.roof_faces.push_back(static_cast<std::uint32_t>(t));
    }
    for (std::size_t i = first_vertex; i < out.uvs.size(); ++i) {
      out.uvs[i] = (out.uvs[i] - Eigen::Vector2d(umin, vmin)) * texel_density;
    }
    if (frames) frames->push_back({n, h, v, Eigen::Vector2d(umax - umin, vmax - vmin)});
  }
  std::sort(out.roof_faces.begin(), out.roof_faces.end());
  return out;
}

// -- roof colour ------------------------------------------------------------------------

BuildingMesh assign_roof_color(const BuildingMesh& mesh, const ColorRaster& aerial) {
  BuildingMesh out = mesh;
  out.roof_color = kFallbackRoofColor;
  if (aerial.image.empty() || mesh.roof_faces.empty()) return out;

  std::vector<std::array<Point2D, 3>> tris;
  geom::Rect box;
  for (auto t : mesh.roof_faces) {
    std::array<Point2D, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = mesh.vertices[mesh.triangles[t][k]].head<2>();
    const double area = geom::orient2d(p[0], p[1], p[2]);
    if (area == 0.0) continue;
    if (area < 0) std::swap(p[1], p[2]);
    for (const auto& q : p) box.extend(q);
    tris.push_back(p);
  }
  if (tris.empty()) return out;

  const double pw = aerial.pixel_width(), ph = aerial.pixel_height();
  const int c0 = std::max(0, static_cast<int>(std::floor((box.min().x() - aerial.bounds.min().x()) / pw - 0.5)));
  const int c1 = std::min(aerial.image.width - 1, static_cast<int>(std::ceil((box.max().x() - aerial.bounds.min().x()) / pw - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::floor((aerial.bounds.max().y() - box.max().y()) / ph - 0.5)));
  const int r1 = std::min(aerial.image.height - 1, static_cast<int>(std::ceil((aerial.bounds.max().y() - box.min().y()) / ph - 0.5)));

  std::array<std::vector<std::uint8_t>, 3> channels;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const Point2D q = aerial.pixel_center(r, c);
      const bool inside = std::any_of(tris.begin(), tris.end(), [&](const auto& p) {
        return geom::orient2d(p[0], p[1], q) >= 0 && geom::orient2d(p[1], p[2], q) >= 0 && geom::orient2d(p[2], p[0], q) >= 0;
      });
      if (!inside) continue;
      const Rgb& px = aerial.image.at(r, c);
      for (int k = 0; k < 3; ++k) channels[k].push_back(px[k]);
    }
  }
  if (channels[0].size() < 4) return out;
  for (int k = 0; k < 3; ++k) {
    auto& ch = channels[k];
    const auto mid = ch.begin() + static_cast<long>((ch.size() - 1) / 2);
    std::nth_element(ch.begin(), mid, ch.end());
    out.roof_color[k] = *mid;
  }
  return out;
}

std::string pick_facade_texture(const BuildingMesh& mesh, std::uint64_t seed) {
  auto attr = [&](const char* key, const char* fallback) {
    auto it = mesh.attributes.find(key);
    return it == mesh.attributes.end() || it->second.empty() ? std::string(fallback) : it->second;
  };
  const std::string use = attr("use", "residential");
  std::string era = "modern";
  try {
    const int year = std::stoi(attr("year", "2000"));
    era = year < 1945 ? "historic" : year < 1990 ? "postwar" : "modern";
  } catch (const std::exception&) {
  }
  const std::uint64_t h = splitmix64(fnv1a(mesh.id, seed ^ 0x5eedf00dULL));
  return "facade/" + use + "/" + era + "/" + std::to_string(h % 4);
}

// -- reference writer ----------------------------------------------------------------------

B3dmPayload make_b3dm(const std::vector<BatchedBuilding>& buildings, const Eigen::Vector3d& rtc_center) {
  std::vector<float> positions, batch_ids;
  std::vector<std::uint32_t> indices;
  std::array<float, 3> lo{1e30f, 1e30f, 1e30f}, hi{-1e30f, -1e30f, -1e30f};
  std::set<std::string> keys;
  for (std::size_t b = 0; b < buildings.size(); ++b) {
    const auto base = static_cast<std::uint32_t>(positions.size() / 3);
    for (const auto& v : buildings[b].vertices) {
      const std::array<float, 3> p{static_cast<float>(v.x()), static_cast<float>(v.z()), static_cast<float>(-v.y())};
      for (int k = 0; k < 3; ++k) {
        positions.push_back(p[k]);
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
      batch_ids.push_back(static_cast<float>(b));
    }
    for (const auto& t : buildings[b].triangles) {
      for (auto i : t) indices.push_back(base + i);
    }
    for (const auto& [k, v] : buildings[b].attributes) keys.insert(k);
  }

  json gltf = {{"asset", {{"version", "2.0"}, {"generator", "geoscene"}}}};
  std::string bin;
  json prim = json::object();
  if (!positions.empty()) {
    const int pos = glb::append_accessor(gltf, bin, positions.data(), positions.size() * 4, glb::kFloat,
                                         positions.size() / 3, "VEC3", lo, hi, 34962);
    const int ids = glb::append_accessor(gltf, bin, batch_ids.data(), batch_ids.size() * 4, glb::kFloat,
                                         batch_ids.size(), "SCALAR", nullptr, nullptr, 34962);
    const int idx = glb::append_accessor(gltf, bin, indices.data(), indices.size() * 4, glb::kUnsignedInt,
                                         indices.size(), "SCALAR", nullptr, nullptr, 34963);
    prim = {{"attributes", {{"POSITION", pos}, {"_BATCHID", ids}}}, {"indices", idx}, {"mode", 4}};
    while (bin.size() % 4) bin += '\0';
    gltf["buffers"] = json::array({{{"byteLength", bin.size()}}});
    gltf["meshes"] = json::array({{{"primitives", json::array({prim})}}});
    gltf["nodes"] = json::array({{{"mesh", 0}}});
    gltf["scenes"] = json::array({{{"nodes", json::array({0})}}});
    gltf["scene"] = 0;
  }

  B3dmPayload p;
  p.feature_table = {{"BATCH_LENGTH", buildings.size()}, {"RTC_CENTER", {rtc_center.x(), rtc_center.y(), rtc_center.z()}}};
  if (!buildings.empty()) {
    json ids = json::array();
    for (const auto& b : buildings) ids.push_back(b.id);
    p.batch_table["id"] = ids;
    for (const auto& k : keys) {
      json col = json::array();
      for (const auto& b : buildings) {
        auto it = b.attributes.find(k);
        col.push_back(it == b.attributes.end() ? std::string() : it->second);
      }
      p.batch_table[k] = col;
    }
  }
  p.glb = glb::write(gltf, bin);
  return p;
}

BatchedBuilding box_building(std::string id, double x0, double y0, double x1, double y1, double h) {
  BatchedBuilding b;
  b.id = std::move(id);
  b.vertices = {{x0, y0, 0}, {x1, y0, 0}, {x1, y1, 0}, {x0, y1, 0}, {x0, y0, h}, {x1, y0, h}, {x1, y1, h}, {x0, y1, h}};
  b.triangles = {
      {0, 1, 5}, {0, 5, 4},  // south
      {1, 2, 6}, {1, 6, 5},  // east
      {2, 3, 7}, {2, 7, 6},  // north
      {3, 0, 4}, {3, 4, 7},  // west
      {4, 5, 6}, {4, 6, 7},  // roof
  };
  return b;
}

}  // namespace geoscene::buildings
