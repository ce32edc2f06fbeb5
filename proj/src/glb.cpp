#include "geoscene/glb.hpp"

#include <cstring>

#include "geoscene/error.hpp"

namespace geoscene::glb {

namespace {

constexpr std::uint32_t kMagic = 0x46546C67;      // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;  // "JSON"
constexpr std::uint32_t kChunkBin = 0x004E4942;   // "BIN\0"

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;  // little-endian hosts only
}

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

int component_size(int type) {
  switch (type) {
    case 5120: case kUnsignedByte: return 1;
    case 5122: case kUnsignedShort: return 2;
    case kUnsignedInt: case kFloat: return 4;
    default: throw Error(ErrorCode::DecodeError, "glb: unknown component type " + std::to_string(type));
  }
}

int type_components(const std::string& type) {
  if (type == "SCALAR") return 1;
  if (type == "VEC2") return 2;
  if (type == "VEC3") return 3;
  if (type == "VEC4") return 4;
  if (type == "MAT4") return 16;
  throw Error(ErrorCode::DecodeError, "glb: unsupported accessor type " + type);
}

double read_component(const char* p, int type) {
  switch (type) {
    case 5120: return *reinterpret_cast<const std::int8_t*>(p);
    case kUnsignedByte: return *reinterpret_cast<const std::uint8_t*>(p);
    case 5122: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case kUnsignedShort: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case kUnsignedInt: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case kFloat: { float v; std::memcpy(&v, p, 4); return v; }
  }
  return 0.0;
}

}  // namespace

Glb parse(std::string_view bytes) {
  if (bytes.size() < 12) throw Error(ErrorCode::LengthMismatch, "glb: shorter than its header");
  if (read_u32(bytes, 0) != kMagic) throw Error(ErrorCode::BadMagic, "glb: bad magic");
  if (read_u32(bytes, 4) != 2) throw Error(ErrorCode::UnsupportedVersion, "glb: version must be 2");
  if (read_u32(bytes, 8) != bytes.size()) throw Error(ErrorCode::LengthMismatch, "glb: length field mismatch");

  Glb out;
  bool have_json = false;
  std::size_t at = 12;
  while (at < bytes.size()) {
    if (bytes.size() - at < 8) throw Error(ErrorCode::LengthMismatch, "glb: truncated chunk header");
    const std::uint32_t len = read_u32(bytes, at);
    const std::uint32_t type = read_u32(bytes, at + 4);
    if (bytes.size() - at - 8 < len) throw Error(ErrorCode::LengthMismatch, "glb: truncated chunk");
    const std::string_view data = bytes.substr(at + 8, len);
    if (!have_json) {
      if (type != kChunkJson) throw Error(ErrorCode::DecodeError, "glb: first chunk must be JSON");
      try {
        out.json = nlohmann::json::parse(data);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DecodeError, std::string("glb: ") + e.what());
      }
      have_json = true;
    } else if (type == kChunkBin && out.bin.empty()) {
      out.bin.assign(data);
    }  // other chunk types are ignored, as the format requires
    at += 8 + len;
  }
  if (!have_json) throw Error(ErrorCode::DecodeError, "glb: missing JSON chunk");
  return out;
}

std::string write(const nlohmann::json& json, std::string_view bin) {
  std::string text = json.dump();
  while (text.size() % 4) text += ' ';
  std::string body(bin);
  while (body.size() % 4) body += '\0';

  std::string out;
  const std::size_t total = 12 + 8 + text.size() + (body.empty() ? 0 : 8 + body.size());
  out.reserve(total);
  put_u32(out, kMagic);
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(total));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_u32(out, kChunkJson);
  out += text;
  if (!body.empty()) {
    put_u32(out, static_cast<std::uint32_t>(body.size()));
    put_u32(out, kChunkBin);
    out += body;
  }
  return out;
}

std::vector<double> read_accessor(const Glb& glb, int index, int* components) {
  const auto& j = glb.json;
  try {
    const auto& acc = j.at("accessors").at(index);
    const int ctype = acc.at("componentType").get<int>();
    const int ncomp = type_components(acc.at("type").get<std::string>());
    const std::size_t count = acc.at("count").get<std::size_t>();
    if (components) *components = ncomp;
    std::vector<double> out(count * ncomp, 0.0);
    if (!acc.contains("bufferView")) return out;  // all zeros per the format
    if (acc.contains("sparse")) throw Error(ErrorCode::UnsupportedFeature, "glb: sparse accessors");
    const auto& view = j.at("bufferViews").at(acc["bufferView"].get<int>());
    if (view.value("buffer", 0) != 0) throw Error(ErrorCode::UnsupportedFeature, "glb: external buffers");
    const std::size_t csize = component_size(ctype);
    const std::size_t elem = csize * ncomp;
    const std::size_t stride = view.value("byteStride", elem);
    const std::size_t start = view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
    const std::size_t view_end = view.value("byteOffset", std::size_t{0}) + view.at("byteLength").get<std::size_t>();
    if (count > 0 && (view_end > glb.bin.size() || start + (count - 1) * stride + elem > view_end)) {
      throw Error(ErrorCode::LengthMismatch, "glb: accessor exceeds its buffer view");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const char* p = glb.bin.data() + start + i * stride;
      for (int k = 0; k < ncomp; ++k) out[i * ncomp + k] = read_component(p + k * csize, ctype);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("glb accessor: ") + e.what());
  }
}

int append_accessor(nlohmann::json& json, std::string& bin, const void* data, std::size_t bytes,
                    int component_type, std::size_t count, const char* type, const nlohmann::json& min,
                    const nlohmann::json& max, int target) {
  while (bin.size() % 4) bin += '\0';
  nlohmann::json view = {{"buffer", 0}, {"byteOffset", bin.size()}, {"byteLength", bytes}};
  if (target) view["target"] = target;
  bin.append(static_cast<const char*>(data), bytes);
  if (!json.contains("bufferViews")) json["bufferViews"] = nlohmann::json::array();
  json["bufferViews"].push_back(view);
  nlohmann::json acc = {{"bufferView", json["bufferViews"].size() - 1},
                        {"componentType", component_type},
                        {"count", count},
                        {"type", type}};
  if (!min.is_null()) acc["min"] = min;
  if (!max.is_null()) acc["max"] = max;
  if (!json.contains("accessors")) json["accessors"] = nlohmann::json::array();
  json["accessors"].push_back(acc);
  return static_cast<int>(json["accessors"].size()) - 1;
}

}  // namespace geoscene::glb
