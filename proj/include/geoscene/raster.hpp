#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoscene/geom.hpp"

namespace geoscene {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major pixel grid; row 0 is the northern (top) edge, as in image files.
template <typename Pixel>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Pixel> pixels;

  Image() = default;
  Image(int w, int h, Pixel fill = Pixel{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Pixel& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  const Pixel& at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  bool empty() const { return width == 0 || height == 0; }
};

using GrayImage = Image<std::uint8_t>;
using RgbImage = Image<Rgb>;

/// Georeferenced RGB raster (aerial imagery).
struct ColorRaster {
  RgbImage image;
  geom::Rect bounds;

  double pixel_width() const { return bounds.sizes().x() / image.width; }
  double pixel_height() const { return bounds.sizes().y() / image.height; }
  geom::Point2D pixel_center(int row, int col) const {
    return {bounds.min().x() + (col + 0.5) * pixel_width(),
            bounds.max().y() - (row + 0.5) * pixel_height()};
  }
};

// Binary netpbm (P5 / P6, maxval 255). Comment lines of the form
// "# bounds minx miny maxx maxy" carry an optional georeference.
struct NetpbmHeader {
  int width = 0;
  int height = 0;
  std::optional<geom::Rect> bounds;
};

GrayImage read_pgm(std::string_view bytes, NetpbmHeader* header = nullptr);
RgbImage read_ppm(std::string_view bytes, NetpbmHeader* header = nullptr);
std::string write_pgm(const GrayImage& image, const std::optional<geom::Rect>& bounds = std::nullopt);
std::string write_ppm(const RgbImage& image, const std::optional<geom::Rect>& bounds = std::nullopt);

}  // namespace geoscene
