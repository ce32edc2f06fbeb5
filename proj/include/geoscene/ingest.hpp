#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "geoscene/buildings.hpp"
#include "geoscene/features.hpp"
#include "geoscene/hash.hpp"
#include "geoscene/landcover.hpp"
#include "geoscene/raster.hpp"
#include "geoscene/terrain.hpp"
#include "geoscene/vegetation.hpp"

namespace geoscene::ingest {

enum class Source { Landcover = 0, Elevation, Buildings, Trees, Aerial };
inline constexpr std::array kAllSources{Source::Landcover, Source::Elevation, Source::Buildings,
                                        Source::Trees, Source::Aerial};
const char* to_string(Source s);

struct SourceLocator {
  bool enabled = true;
  std::string fixture_dir;  ///< root holding `<source>/...` files for offline mode
  std::string base_url;     ///< online mode: GET base_url + "/" + relative path
};

struct SourceConfig {
  std::map<Source, SourceLocator> sources;
  std::string cache_dir;  ///< empty disables the disk cache
  bool offline = true;
  /// Geographic anchor of the local metric frame used by the lattice sources
  /// (elevation grids, aerial images, tileset boxes).
  geom::GeoPoint dataset_origin;
  double elevation_tile_size = 500.0;  ///< metres per elevation file
  double aerial_tile_size = 1000.0;    ///< metres per aerial image
  int landcover_zoom = 15;
  int tree_zoom = 16;

  /// Same fixture root for every source.
  static SourceConfig offline_fixtures(const std::string& root, const geom::GeoPoint& dataset_origin);

  /// Throws InvalidArgument when offline mode lacks a fixture_dir for an
  /// enabled source (or online mode lacks a base_url).
  void validate() const;
  const SourceLocator& locator(Source s) const;
};

/// Network access used in online mode. Throws SourceUnavailable on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string get(const std::string& url) = 0;
};

/// cpp-httplib GET; any non-200 status is SourceUnavailable.
std::unique_ptr<Transport> make_http_transport();

/// Source adapters with a content-addressed disk cache.
class DataSource {
 public:
  /// `scene_origin` anchors the scene frame the outputs are expressed in.
  DataSource(SourceConfig cfg, const geom::GeoPoint& scene_origin,
             std::shared_ptr<Transport> transport = nullptr);

  const SourceConfig& config() const { return cfg_; }
  const geom::GeoPoint& scene_origin() const { return scene_origin_; }
  /// Dataset frame -> scene frame translation.
  const geom::Point2D& dataset_offset() const { return offset_; }

  /// Raw bytes of `relpath` under the source, through the cache. Throws
  /// FixtureMissing (offline) or SourceUnavailable (online).
  std::string fetch_bytes(Source source, const std::string& relpath);

  FeatureCollection fetch_vector_tile(const TileAddress& addr,
                                      const landcover::ClassTable& classes = landcover::ClassTable::defaults());
  terrain::HeightField load_heightgrid(const geom::Rect& region);
  buildings::TilesetIndex fetch_building_tileset(const geom::Rect& region);
  vegetation::CrownRaster load_tree_raster(const TileAddress& addr);
  ColorRaster load_aerial_image(const geom::Rect& region);

  /// Reads that reached the fixture directory or the network (cache misses).
  std::size_t source_accesses(Source s) const;
  std::size_t source_accesses() const;
  std::size_t cache_hits() const { return cache_hits_; }

 private:
  std::string read_source(Source source, const std::string& relpath);
  std::filesystem::path cache_path(Source source, const std::string& relpath) const;
  std::mutex& key_mutex(const std::string& key);

  SourceConfig cfg_;
  geom::GeoPoint scene_origin_;
  geom::Point2D offset_;
  std::shared_ptr<Transport> transport_;
  std::array<std::atomic<std::size_t>, kAllSources.size()> accesses_{};
  std::atomic<std::size_t> cache_hits_{0};
  std::mutex keys_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

/// GeoJSON FeatureCollection (lon/lat) -> scene-frame features. Class from
/// property "class_code" or "class" (name). Invalid geometry and unknown
/// classes are dropped and counted. Throws DecodeError on malformed JSON.
FeatureCollection decode_geojson(std::string_view text, const geom::GeoPoint& origin,
                                 const landcover::ClassTable& classes, const geom::Rect& bounds);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace geoscene::ingest
