#include "geoscene/ingest.hpp"

#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace geoscene::ingest {

namespace fs = std::filesystem;
using geom::Point2D;
using nlohmann::json;

const char* to_string(Source s) {
  switch (s) {
    case Source::Landcover: return "landcover";
    case Source::Elevation: return "elevation";
    case Source::Buildings: return "buildings";
    case Source::Trees: return "trees";
    case Source::Aerial: return "aerial";
  }
  return "unknown";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FixtureMissing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::InvalidArgument, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

// -- configuration -----------------------------------------------------------------

SourceConfig SourceConfig::offline_fixtures(const std::string& root, const geom::GeoPoint& dataset_origin) {
  SourceConfig cfg;
  cfg.offline = true;
  cfg.dataset_origin = dataset_origin;
  for (Source s : kAllSources) cfg.sources[s] = SourceLocator{true, root, {}};
  return cfg;
}

const SourceLocator& SourceConfig::locator(Source s) const {
  static const SourceLocator disabled{false, {}, {}};
  auto it = sources.find(s);
  return it == sources.end() ? disabled : it->second;
}

void SourceConfig::validate() const {
  for (Source s : kAllSources) {
    const auto& loc = locator(s);
    if (!loc.enabled) continue;
    if (offline && loc.fixture_dir.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string("offline mode needs a fixture directory for source ") + to_string(s));
    }
    if (!offline && loc.base_url.empty()) {
      throw Error(ErrorCode::InvalidArgument, std::string("no base_url for source ") + to_string(s));
    }
  }
  if (!(elevation_tile_size > 0) || !(aerial_tile_size > 0)) {
    throw Error(ErrorCode::InvalidArgument, "lattice tile sizes must be positive");
  }
}

// -- transport -----------------------------------------------------------------------

namespace {

class HttpTransport : public Transport {
 public:
  std::string get(const std::string& url) override {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (scheme_end == std::string::npos || path_start == std::string::npos) {
      throw Error(ErrorCode::SourceUnavailable, "bad url " + url);
    }
    httplib::Client client(url.substr(0, path_start));
    client.set_follow_location(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    auto res = client.Get(url.substr(path_start));
    if (!res) {
      throw Error(ErrorCode::SourceUnavailable, url + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::SourceUnavailable, url + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
  }
};

std::string lattice_name(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

struct LatticeRange {
  long x0, x1, y0, y1;  // inclusive tile indices
};

LatticeRange lattice_range(const geom::Rect& r, double size) {
  auto lo = [&](double v) { return static_cast<long>(std::floor(v / size)); };
  auto hi = [&](double v, long l) { return std::max(l, static_cast<long>(std::ceil(v / size)) - 1); };
  const long x0 = lo(r.min().x()), y0 = lo(r.min().y());
  return {x0, hi(r.max().x(), x0), y0, hi(r.max().y(), y0)};
}

constexpr double kCropMargin = 64.0;  // metres kept around a requested region

}  // namespace

std::unique_ptr<Transport> make_http_transport() { return std::make_unique<HttpTransport>(); }

// -- data source ---------------------------------------------------------------------

DataSource::DataSource(SourceConfig cfg, const geom::GeoPoint& scene_origin,
                       std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), scene_origin_(scene_origin), transport_(std::move(transport)) {
  cfg_.validate();
  offset_ = geom::project_unchecked(cfg_.dataset_origin, scene_origin_);
  if (!cfg_.offline && !transport_) transport_ = make_http_transport();
}

std::size_t DataSource::source_accesses(Source s) const { return accesses_[static_cast<int>(s)]; }

std::size_t DataSource::source_accesses() const {
  std::size_t n = 0;
  for (const auto& a : accesses_) n += a;
  return n;
}

std::mutex& DataSource::key_mutex(const std::string& key) {
  std::lock_guard lock(keys_mutex_);
  auto& m = key_mutexes_[key];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

fs::path DataSource::cache_path(Source source, const std::string& relpath) const {
  const std::string key = std::string(to_string(source)) + "\n" + relpath;
  return fs::path(cfg_.cache_dir) / to_string(source) / (hex64(fnv1a(key)) + ".bin");
}

std::string DataSource::read_source(Source source, const std::string& relpath) {
  const auto& loc = cfg_.locator(source);
  if (!loc.enabled) {
    throw Error(cfg_.offline ? ErrorCode::FixtureMissing : ErrorCode::SourceUnavailable,
                std::string("source disabled: ") + to_string(source));
  }
  ++accesses_[static_cast<int>(source)];
  if (cfg_.offline) {
    const fs::path path = fs::path(loc.fixture_dir) / to_string(source) / relpath;
    if (!fs::is_regular_file(path)) {
      throw Error(ErrorCode::FixtureMissing, std::string(to_string(source)) + "/" + relpath);
    }
    return read_file(path);
  }
  std::string url = loc.base_url;
  if (const auto at = url.find("{path}"); at != std::string::npos) {
    url.replace(at, 6, relpath);
  } else {
    url += "/" + relpath;
  }
  return transport_->get(url);
}

std::string DataSource::fetch_bytes(Source source, const std::string& relpath) {
  if (cfg_.cache_dir.empty()) return read_source(source, relpath);
  const fs::path path = cache_path(source, relpath);
  std::lock_guard lock(key_mutex(path.string()));
  if (fs::is_regular_file(path)) {
    ++cache_hits_;
    return read_file(path);
  }
  std::string bytes = read_source(source, relpath);
  write_file(path, bytes);
  return bytes;
}

// -- vector tiles ---------------------------------------------------------------------

namespace {

geom::Ring decode_ring(const json& coords, const geom::GeoPoint& origin) {
  geom::Ring ring;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw Error(ErrorCode::DecodeError, "geojson: bad coordinate");
    }
    ring.push_back(geom::project_to_scene({c[1].get<double>(), c[0].get<double>()}, origin));
  }
  return ring;
}

}  // namespace

FeatureCollection decode_geojson(std::string_view text, const geom::GeoPoint& origin,
                                 const landcover::ClassTable& classes, const geom::Rect& bounds) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::DecodeError, std::string("geojson: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw Error(ErrorCode::DecodeError, "geojson: expected a FeatureCollection");
  }
  FeatureCollection fc;
  fc.bounds = bounds;
  for (const auto& f : doc["features"]) {
    if (!f.is_object() || !f.contains("geometry")) throw Error(ErrorCode::DecodeError, "geojson: bad feature");
    const json props = f.value("properties", json::object());
    std::map<std::string, std::string> attrs;
    for (const auto& [k, v] : props.items()) attrs[k] = v.is_string() ? v.get<std::string>() : v.dump();
    if (f.contains("id")) attrs["id"] = f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();

    const landcover::LandCoverClass* cls = nullptr;
    if (props.contains("class_code") && props["class_code"].is_number_integer()) {
      const auto code = props["class_code"].get<int>();
      if (code >= 0 && code < 256) cls = classes.find(static_cast<geom::ClassCode>(code));
    } else if (props.contains("class") && props["class"].is_string()) {
      cls = classes.find(props["class"].get<std::string>());
    }

    const json& geometry = f["geometry"];
    if (geometry.is_null()) continue;
    const std::string type = geometry.value("type", "");
    std::vector<json> polygons;
    if (type == "Polygon") {
      polygons.push_back(geometry["coordinates"]);
    } else if (type == "MultiPolygon") {
      for (const auto& p : geometry["coordinates"]) polygons.push_back(p);
    } else {
      ++fc.dropped;  // points and lines carry no land cover
      continue;
    }
    for (const auto& rings : polygons) {
      if (cls == nullptr) {
        ++fc.dropped;
        continue;
      }
      if (!rings.is_array() || rings.empty()) throw Error(ErrorCode::DecodeError, "geojson: empty polygon");
      try {
        std::vector<geom::Ring> holes;
        for (std::size_t i = 1; i < rings.size(); ++i) holes.push_back(decode_ring(rings[i], origin));
        geom::PolygonWithHoles poly(decode_ring(rings[0], origin), std::move(holes), cls->code);
        geom::validate(poly);
        fc.features.push_back({std::move(poly), attrs});
      } catch (const Error& e) {
        if (e.code() == ErrorCode::DecodeError) throw;
        ++fc.dropped;  // degenerate, self-intersecting or out-of-region geometry
      }
    }
  }
  return fc;
}

FeatureCollection DataSource::fetch_vector_tile(const TileAddress& addr, const landcover::ClassTable& classes) {
  addr.validate();
  const std::string bytes = fetch_bytes(Source::Landcover, addr.path() + ".geojson");
  return decode_geojson(bytes, scene_origin_, classes, tile_scene_bounds(addr, scene_origin_));
}

// -- elevation --------------------------------------------------------------------------

terrain::HeightField DataSource::load_heightgrid(const geom::Rect& region) {
  const double ts = cfg_.elevation_tile_size;
  const geom::Rect local(region.min() - offset_, region.max() - offset_);
  const LatticeRange range = lattice_range(local, ts);

  std::vector<terrain::HeightField> tiles;
  for (long iy = range.y0; iy <= range.y1; ++iy) {
    for (long ix = range.x0; ix <= range.x1; ++ix) {
      const std::string name = lattice_name(ix * ts) + "_" + lattice_name(iy * ts) + ".asc";
      tiles.push_back(terrain::read_esri_ascii(fetch_bytes(Source::Elevation, name)));
    }
  }
  const double cs = tiles.front().cell_size;
  for (const auto& t : tiles) {
    if (std::abs(t.cell_size - cs) > 1e-9 * cs) throw Error(ErrorCode::DecodeError, "elevation tiles differ in cell size");
  }

  // Lattice covering all tiles, anchored at the first tile's cell grid, then
  // cropped to the region plus a margin.
  const Point2D anchor = tiles.front().origin;
  auto cell_index = [&](double v, double a) {
    const double f = (v - a) / cs;
    const double r = std::round(f);
    if (std::abs(f - r) > 1e-6) throw Error(ErrorCode::DecodeError, "elevation tiles are not cell-aligned");
    return static_cast<long>(r);
  };
  long c0 = LONG_MAX, r0 = LONG_MAX, c1 = LONG_MIN, r1 = LONG_MIN;
  for (const auto& t : tiles) {
    const long c = cell_index(t.origin.x(), anchor.x()), r = cell_index(t.origin.y(), anchor.y());
    c0 = std::min(c0, c), r0 = std::min(r0, r);
    c1 = std::max(c1, c + t.ncols), r1 = std::max(r1, r + t.nrows);
  }
  c0 = std::max(c0, static_cast<long>(std::floor((local.min().x() - kCropMargin - anchor.x()) / cs)));
  r0 = std::max(r0, static_cast<long>(std::floor((local.min().y() - kCropMargin - anchor.y()) / cs)));
  c1 = std::min(c1, static_cast<long>(std::ceil((local.max().x() + kCropMargin - anchor.x()) / cs)));
  r1 = std::min(r1, static_cast<long>(std::ceil((local.max().y() + kCropMargin - anchor.y()) / cs)));

  const double nodata = tiles.front().nodata;
  terrain::HeightField out(static_cast<int>(c1 - c0), static_cast<int>(r1 - r0),
                           anchor + Point2D(c0 * cs, r0 * cs) + offset_, cs, nodata, nodata);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> written =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(out.nrows, out.ncols, false);
  for (const auto& t : tiles) {
    const long tc = cell_index(t.origin.x(), anchor.x()) - c0, tr = cell_index(t.origin.y(), anchor.y()) - r0;
    for (int r = 0; r < t.nrows; ++r) {
      const long orow = tr + r;
      if (orow < 0 || orow >= out.nrows) continue;
      for (int c = 0; c < t.ncols; ++c) {
        const long ocol = tc + c;
        if (ocol < 0 || ocol >= out.ncols) continue;
        const double v = t.valid(r, c) ? t.values(r, c) : nodata;
        if (written(orow, ocol)) {
          // Overlapping tiles must agree on shared samples.
          const double prev = out.values(orow, ocol);
          if ((prev == nodata) != (v == nodata) || (v != nodata && std::abs(prev - v) > 1e-6)) {
            throw Error(ErrorCode::DecodeError, "elevation tiles disagree on a shared seam");
          }
          continue;
        }
        out.values(orow, ocol) = v;
        written(orow, ocol) = true;
      }
    }
  }
  return out;
}

// -- buildings ---------------------------------------------------------------------------

buildings::TilesetIndex DataSource::fetch_building_tileset(const geom::Rect& region) {
  buildings::TilesetFrame frame;
  frame.offset = Eigen::Vector3d(offset_.x(), offset_.y(), 0.0);
  frame.scene_origin = scene_origin_;
  auto index = buildings::parse_tileset(fetch_bytes(Source::Buildings, "tileset.json"), frame);
  index.contents = buildings::select_contents(index, region);
  return index;
}

// -- trees --------------------------------------------------------------------------------

vegetation::CrownRaster DataSource::load_tree_raster(const TileAddress& addr) {
  addr.validate();
  vegetation::CrownRaster raster;
  raster.addr = addr;
  raster.pixels = read_pgm(fetch_bytes(Source::Trees, addr.path() + ".pgm"));
  raster.bounds = tile_scene_bounds(addr, scene_origin_);
  return raster;
}

// -- aerial ---------------------------------------------------------------------------------

ColorRaster DataSource::load_aerial_image(const geom::Rect& region) {
  const double ts = cfg_.aerial_tile_size;
  const geom::Rect local(region.min() - offset_, region.max() - offset_);
  const LatticeRange range = lattice_range(local, ts);

  struct Piece {
    long ix, iy;
    RgbImage image;
  };
  std::vector<Piece> pieces;
  for (long iy = range.y0; iy <= range.y1; ++iy) {
    for (long ix = range.x0; ix <= range.x1; ++ix) {
      const std::string name = lattice_name(ix * ts) + "_" + lattice_name(iy * ts) + ".ppm";
      NetpbmHeader header;
      RgbImage img = read_ppm(fetch_bytes(Source::Aerial, name), &header);
      if (header.bounds) {
        const geom::Rect expect(Point2D(ix * ts, iy * ts), Point2D((ix + 1) * ts, (iy + 1) * ts));
        if (!header.bounds->isApprox(expect, 1e-9)) {
          throw Error(ErrorCode::DecodeError, "aerial tile " + name + " georeference mismatch");
        }
      }
      pieces.push_back({ix, iy, std::move(img)});
    }
  }
  const int w = pieces.front().image.width, h = pieces.front().image.height;
  for (const auto& p : pieces) {
    if (p.image.width != w || p.image.height != h) throw Error(ErrorCode::DecodeError, "aerial tiles differ in size");
  }
  const long nx = range.x1 - range.x0 + 1, ny = range.y1 - range.y0 + 1;
  ColorRaster out;
  out.image = RgbImage(static_cast<int>(nx * w), static_cast<int>(ny * h));
  for (const auto& p : pieces) {
    const long col0 = (p.ix - range.x0) * w;
    const long row0 = (range.y1 - p.iy) * h;  // image rows run north to south
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) out.image.at(static_cast<int>(row0 + r), static_cast<int>(col0 + c)) = p.image.at(r, c);
    }
  }
  out.bounds = geom::Rect(Point2D(range.x0 * ts, range.y0 * ts) + offset_,
                          Point2D((range.x1 + 1) * ts, (range.y1 + 1) * ts) + offset_);
  return out;
}

}  // namespace geoscene::ingest
