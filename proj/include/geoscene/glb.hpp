#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace geoscene::glb {

/// Binary glTF 2.0 container: JSON chunk plus optional BIN chunk.
struct Glb {
  nlohmann::json json;
  std::string bin;
};

/// Throws BadMagic, UnsupportedVersion, LengthMismatch or DecodeError.
Glb parse(std::string_view bytes);

/// JSON chunk padded with spaces, BIN chunk with zeros, both to 4 bytes.
std::string write(const nlohmann::json& json, std::string_view bin);

// glTF accessor component types.
inline constexpr int kUnsignedByte = 5121;
inline constexpr int kUnsignedShort = 5123;
inline constexpr int kUnsignedInt = 5125;
inline constexpr int kFloat = 5126;

/// Reads accessor `index` as doubles, `components` values per element
/// (SCALAR 1, VEC2 2, VEC3 3, ...). Normalized integer data is not rescaled.
std::vector<double> read_accessor(const Glb& glb, int index, int* components = nullptr);

/// Appends `data` to a BIN buffer (4-byte aligned) and registers a
/// bufferView + accessor in `json`. Returns the accessor index.
int append_accessor(nlohmann::json& json, std::string& bin, const void* data, std::size_t bytes,
                    int component_type, std::size_t count, const char* type,
                    const nlohmann::json& min = nullptr, const nlohmann::json& max = nullptr,
                    int target = 0);

}  // namespace geoscene::glb
