#include "geoscene/raster.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace geoscene {

namespace {

struct HeaderCursor {
  std::string_view bytes;
  std::size_t pos = 0;
  std::optional<geom::Rect> bounds;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        const std::size_t end = bytes.find('\n', pos);
        const std::string line(bytes.substr(pos + 1, end == std::string_view::npos ? std::string_view::npos : end - pos - 1));
        std::istringstream in(line);
        std::string key;
        double x0, y0, x1, y1;
        if (in >> key && key == "bounds" && in >> x0 >> y0 >> x1 >> y1) {
          bounds = geom::Rect(geom::Point2D(x0, y0), geom::Point2D(x1, y1));
        }
        pos = end == std::string_view::npos ? bytes.size() : end + 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  }

  int number() {
    const std::string t = token();
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::DecodeError, "netpbm: malformed header");
    }
    return std::stoi(t);
  }
};

template <typename Pixel, int Channels>
Image<Pixel> read_netpbm(std::string_view bytes, const char* magic, NetpbmHeader* header) {
  HeaderCursor cur{bytes, 0, std::nullopt};
  if (cur.token() != magic) {
    throw Error(ErrorCode::DecodeError, std::string("netpbm: expected magic ") + magic);
  }
  const int width = cur.number();
  const int height = cur.number();
  const int maxval = cur.number();
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorCode::DecodeError, "netpbm: unsupported dimensions or maxval");
  }
  if (cur.pos >= bytes.size()) throw Error(ErrorCode::DecodeError, "netpbm: truncated");
  ++cur.pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(width) * height * Channels;
  if (bytes.size() - cur.pos < need) throw Error(ErrorCode::DecodeError, "netpbm: truncated raster");

  Image<Pixel> img(width, height);
  std::memcpy(img.pixels.data(), bytes.data() + cur.pos, need);
  if (header != nullptr) *header = {width, height, cur.bounds};
  return img;
}

template <typename Pixel, int Channels>
std::string write_netpbm(const Image<Pixel>& img, const char* magic,
                         const std::optional<geom::Rect>& bounds) {
  std::string out = std::string(magic) + "\n";
  if (bounds) {
    char line[160];
    std::snprintf(line, sizeof line, "# bounds %.17g %.17g %.17g %.17g\n", bounds->min().x(),
                  bounds->min().y(), bounds->max().x(), bounds->max().y());
    out += line;
  }
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * Channels;
  out.append(reinterpret_cast<const char*>(img.pixels.data()), n);
  return out;
}

}  // namespace

GrayImage read_pgm(std::string_view bytes, NetpbmHeader* header) {
  return read_netpbm<std::uint8_t, 1>(bytes, "P5", header);
}

RgbImage read_ppm(std::string_view bytes, NetpbmHeader* header) {
  static_assert(sizeof(Rgb) == 3);
  return read_netpbm<Rgb, 3>(bytes, "P6", header);
}

std::string write_pgm(const GrayImage& image, const std::optional<geom::Rect>& bounds) {
  return write_netpbm<std::uint8_t, 1>(image, "P5", bounds);
}

std::string write_ppm(const RgbImage& image, const std::optional<geom::Rect>& bounds) {
  return write_netpbm<Rgb, 3>(image, "P6", bounds);
}

}  // namespace geoscene
