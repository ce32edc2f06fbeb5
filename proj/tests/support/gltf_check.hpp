#pragma once

// Structural glTF 2.0 checks used as a stand-in for an external validator:
// indices in range, accessors inside their views, views inside the buffer,
// POSITION min/max matching the data, node graph a forest.

#include <cstring>
#include <string>
#include <vector>

#include "geoscene/glb.hpp"

namespace geoscene::testing {

inline std::vector<std::string> gltf_issues(const glb::Glb& g) {
  using nlohmann::json;
  std::vector<std::string> issues;
  auto fail = [&](std::string s) { issues.push_back(std::move(s)); };
  const json& j = g.json;

  if (!j.contains("asset") || j["asset"].value("version", "") != "2.0") fail("asset.version");

  std::size_t buffer_len = 0;
  if (j.contains("buffers")) {
    if (j["buffers"].size() != 1) fail("expected one buffer");
    buffer_len = j["buffers"][0].value("byteLength", std::size_t{0});
    if (buffer_len > g.bin.size() || g.bin.size() - buffer_len > 3) fail("buffer length vs BIN chunk");
  } else if (!g.bin.empty()) {
    fail("BIN chunk without buffer");
  }

  const auto views = j.value("bufferViews", json::array());
  for (const auto& v : views) {
    const std::size_t off = v.value("byteOffset", std::size_t{0});
    if (off + v.value("byteLength", std::size_t{0}) > buffer_len) fail("bufferView outside buffer");
    if (off % 4) fail("bufferView not 4-byte aligned");
  }

  auto comps = [](const std::string& t) { return t == "SCALAR" ? 1 : t == "VEC2" ? 2 : t == "VEC3" ? 3 : 4; };
  auto csize = [](int c) { return c == 5121 || c == 5120 ? 1 : c == 5123 || c == 5122 ? 2 : 4; };
  const auto accessors = j.value("accessors", json::array());
  for (std::size_t i = 0; i < accessors.size(); ++i) {
    const auto& a = accessors[i];
    const int bv = a.value("bufferView", -1);
    if (bv < 0 || bv >= static_cast<int>(views.size())) {
      fail("accessor without valid bufferView");
      continue;
    }
    const std::size_t need = a.value("byteOffset", std::size_t{0}) +
                             a.value("count", std::size_t{0}) * comps(a.value("type", "")) * csize(a.value("componentType", 0));
    if (need > views[bv].value("byteLength", std::size_t{0})) fail("accessor overruns view");
  }

  const auto meshes = j.value("meshes", json::array());
  const auto n_materials = j.value("materials", json::array()).size();
  for (const auto& m : meshes) {
    for (const auto& p : m.value("primitives", json::array())) {
      const auto& attrs = p.value("attributes", json::object());
      if (!attrs.contains("POSITION")) {
        fail("primitive without POSITION");
        continue;
      }
      const int pa = attrs["POSITION"];
      const auto pos = glb::read_accessor(g, pa);
      const std::size_t nv = accessors[pa]["count"];
      if (!accessors[pa].contains("min") || !accessors[pa].contains("max")) fail("POSITION without min/max");
      else {
        for (int k = 0; k < 3; ++k) {
          double lo = 1e300, hi = -1e300;
          for (std::size_t v = 0; v < nv; ++v) {
            lo = std::min(lo, pos[v * 3 + k]);
            hi = std::max(hi, pos[v * 3 + k]);
          }
          if (nv && (accessors[pa]["min"][k].get<double>() != lo || accessors[pa]["max"][k].get<double>() != hi))
            fail("POSITION min/max differ from data");
        }
      }
      for (const auto& [name, idx] : attrs.items())
        if (accessors[idx.get<int>()]["count"] != nv) fail("attribute count mismatch: " + name);
      if (p.contains("indices")) {
        const auto ix = glb::read_accessor(g, p["indices"]);
        for (double v : ix)
          if (v >= static_cast<double>(nv)) fail("index out of range");
        if (p.value("mode", 4) == 4 && ix.size() % 3) fail("triangle index count not a multiple of 3");
      }
      if (p.contains("material") && p["material"].get<std::size_t>() >= n_materials) fail("material index");
    }
  }

  const auto nodes = j.value("nodes", json::array());
  std::vector<int> parents(nodes.size(), 0);
  for (const auto& n : nodes) {
    if (n.contains("mesh") && n["mesh"].get<std::size_t>() >= meshes.size()) fail("node mesh index");
    for (const auto& c : n.value("children", json::array())) {
      if (c.get<std::size_t>() >= nodes.size()) fail("child index");
      else ++parents[c.get<std::size_t>()];
    }
  }
  for (int p : parents)
    if (p > 1) fail("node with two parents");
  if (!j.contains("scenes") || j["scenes"].empty()) fail("no scene");
  return issues;
}

}  // namespace geoscene::testing
