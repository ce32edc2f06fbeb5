#pragma once

#include <optional>

#include "geoscene/error.hpp"

namespace geoscene::testing {

// Code of the geoscene::Error thrown by f, or nullopt if it returned.
template <typename F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace geoscene::testing
