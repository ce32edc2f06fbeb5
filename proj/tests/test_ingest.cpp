#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include "doctest.h"
#include "geoscene/ingest.hpp"
#include "json.hpp"
#include "support/expect_error.hpp"
#include "support/temp_dir.hpp"

using namespace geoscene;
using namespace geoscene::ingest;
using geoscene::testing::error_of;
using geom::Point2D;
using geom::Rect;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const geom::GeoPoint kOrigin{51.84, 5.86};

struct TempDir : testing::TempDir {
  TempDir() : testing::TempDir("geoscene_ingest") {}
};

TileAddress origin_tile(int zoom, const std::string& layer) {
  const GeoBox box{kOrigin.lat, kOrigin.lon, kOrigin.lat + 1e-6, kOrigin.lon + 1e-6};
  return tiles_covering(box, zoom, layer).front();
}

// Axis-aligned lon/lat ring at fractions of the tile box.
json frac_ring(const GeoBox& b, double fx0, double fy0, double fx1, double fy1) {
  auto lon = [&](double f) { return b.min_lon + f * (b.max_lon - b.min_lon); };
  auto lat = [&](double f) { return b.min_lat + f * (b.max_lat - b.min_lat); };
  return json::array({{lon(fx0), lat(fy0)}, {lon(fx1), lat(fy0)}, {lon(fx1), lat(fy1)}, {lon(fx0), lat(fy1)}, {lon(fx0), lat(fy0)}});
}

json feature(const json& rings, const json& props) {
  return {{"type", "Feature"}, {"properties", props}, {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}};
}

std::string three_feature_tile(const TileAddress& addr) {
  const GeoBox b = tile_geo_bounds(addr);
  json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
  fc["features"].push_back(feature(json::array({frac_ring(b, 0.1, 0.1, 0.4, 0.4)}), {{"class", "water"}}));
  fc["features"].push_back(feature(json::array({frac_ring(b, 0.5, 0.1, 0.9, 0.9), frac_ring(b, 0.6, 0.2, 0.7, 0.3)}),
                                   {{"class_code", 1}, {"name", "park"}}));
  fc["features"].push_back(feature(json::array({frac_ring(b, 0.0, 0.45, 1.0, 0.5)}), {{"class", "road"}}));
  return fc.dump();
}

terrain::HeightField grid(int n, Point2D origin, double cell, double value) {
  return terrain::HeightField(n, n, origin, cell, value);
}

}  // namespace

TEST_CASE("ingest: vector tile decode and caching") {
  TempDir fixtures, cache;
  const TileAddress addr = origin_tile(15, "landcover");
  fixtures.put("landcover/" + addr.path() + ".geojson", three_feature_tile(addr));

  auto cfg = SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin);
  cfg.cache_dir = cache.path.string();
  DataSource src(cfg, kOrigin);

  const auto fc = src.fetch_vector_tile(addr);
  REQUIRE(fc.features.size() == 3);
  CHECK(fc.features[0].polygon.class_code() == 0);
  CHECK(fc.features[1].polygon.class_code() == 1);
  CHECK(fc.features[1].polygon.holes().size() == 1);
  CHECK(fc.features[1].attributes.at("name") == "park");
  CHECK(fc.features[2].polygon.class_code() == landcover::ClassTable::defaults().find("road")->code);
  CHECK(fc.bounds.isApprox(tile_scene_bounds(addr, kOrigin)));
  CHECK(fc.bounds.contains(fc.features[0].polygon.bounds()));
  CHECK(src.source_accesses(Source::Landcover) == 1);

  const std::string first = src.fetch_bytes(Source::Landcover, addr.path() + ".geojson");
  const auto again = src.fetch_vector_tile(addr);
  CHECK(src.source_accesses(Source::Landcover) == 1);
  CHECK(src.cache_hits() == 2);
  CHECK(first == three_feature_tile(addr));
  CHECK(again.features.size() == 3);

  // A fresh source over the same cache never touches the fixtures.
  fs::remove_all(fixtures.path / "landcover");
  DataSource warm(cfg, kOrigin);
  CHECK(warm.fetch_vector_tile(addr).features.size() == 3);
  CHECK(warm.source_accesses() == 0);
}

TEST_CASE("ingest: empty, missing and malformed tiles") {
  TempDir fixtures;
  const TileAddress addr = origin_tile(15, "landcover");
  fixtures.put("landcover/" + addr.path() + ".geojson", R"({"type":"FeatureCollection","features":[]})");
  DataSource src(SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin), kOrigin);
  const auto fc = src.fetch_vector_tile(addr);
  CHECK(fc.features.empty());
  CHECK(fc.bounds.isApprox(tile_scene_bounds(addr, kOrigin)));

  TileAddress other = addr;
  other.x += 1;
  CHECK(error_of([&] { src.fetch_vector_tile(other); }) == ErrorCode::FixtureMissing);

  fixtures.put("landcover/" + other.path() + ".geojson", "{\"type\": \"FeatureCollection\", \"features\": [");
  CHECK(error_of([&] { src.fetch_vector_tile(other); }) == ErrorCode::DecodeError);

  TileAddress bad = addr;
  bad.x = -1;
  CHECK(error_of([&] { src.fetch_vector_tile(bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("ingest: unknown classes and invalid geometry are dropped") {
  const TileAddress addr = origin_tile(15, "landcover");
  const GeoBox b = tile_geo_bounds(addr);
  json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
  fc["features"].push_back(feature(json::array({frac_ring(b, 0.1, 0.1, 0.4, 0.4)}), {{"class", "lava"}}));
  json bow = json::array({json::array({{b.min_lon, b.min_lat}, {b.max_lon, b.max_lat}, {b.max_lon, b.min_lat}, {b.min_lon, b.max_lat}, {b.min_lon, b.min_lat}})});
  fc["features"].push_back(feature(bow, {{"class", "grass"}}));
  fc["features"].push_back({{"type", "Feature"}, {"properties", {{"class", "grass"}}}, {"geometry", {{"type", "Point"}, {"coordinates", {b.min_lon, b.min_lat}}}}});
  fc["features"].push_back(feature(json::array({frac_ring(b, 0.5, 0.5, 0.6, 0.6)}), {{"class", "forest"}}));
  const auto out = decode_geojson(fc.dump(), kOrigin, landcover::ClassTable::defaults(), tile_scene_bounds(addr, kOrigin));
  CHECK(out.features.size() == 1);
  CHECK(out.dropped == 3);
}

TEST_CASE("ingest: height grid with one nodata cell and constant grid") {
  TempDir fixtures;
  auto hf = grid(4, Point2D(0, 0), 1.0, 2.0);
  hf.values(2, 1) = hf.nodata;
  fixtures.put("elevation/0_0.asc", terrain::write_esri_ascii(hf));
  auto flat = grid(4, Point2D(4, 0), 1.0, 3.5);
  fixtures.put("elevation/4_0.asc", terrain::write_esri_ascii(flat));

  auto cfg = SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin);
  cfg.elevation_tile_size = 4;
  DataSource src(cfg, kOrigin);
  const auto got = src.load_heightgrid(Rect(Point2D(0.5, 0.5), Point2D(3.5, 3.5)));
  CHECK(got.ncols == 4);
  CHECK(got.nrows == 4);
  CHECK(got.nodata_count() == 1);
  CHECK(!got.valid(2, 1));

  const auto c = src.load_heightgrid(Rect(Point2D(4.5, 0.5), Point2D(7.5, 3.5)));
  CHECK(c.nodata_count() == 0);
  CHECK((c.values.array() == 3.5).all());
  CHECK(c.origin.isApprox(Point2D(4, 0)));
}

TEST_CASE("ingest: mosaicked height grids keep seams consistent") {
  TempDir fixtures;
  auto plane = [](double x, double y) { return 0.25 * x - 0.5 * y + 10; };
  for (int tx = 0; tx < 2; ++tx) {
    auto t = grid(8, Point2D(tx * 8.0, 0), 1.0, 0.0);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const Point2D p = t.cell_center(r, c);
        t.values(r, c) = plane(p.x(), p.y());
      }
    }
    fixtures.put("elevation/" + std::to_string(tx * 8) + "_0.asc", terrain::write_esri_ascii(t));
  }
  auto cfg = SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin);
  cfg.elevation_tile_size = 8;
  DataSource src(cfg, kOrigin);
  const auto m = src.load_heightgrid(Rect(Point2D(2, 1), Point2D(13, 7)));
  REQUIRE(m.ncols == 16);
  REQUIRE(m.nrows == 8);
  for (int r = 0; r < m.nrows; ++r) {
    for (int c = 0; c < m.ncols; ++c) {
      const Point2D p = m.cell_center(r, c);
      CHECK(m.values(r, c) == doctest::Approx(plane(p.x(), p.y())).epsilon(1e-12));
    }
    CHECK(m.values(r, 8) - m.values(r, 7) == doctest::Approx(0.25));
  }
  CHECK(src.source_accesses(Source::Elevation) == 2);

  // Overlapping tiles that disagree are rejected.
  auto clash = grid(8, Point2D(7, 0), 1.0, 99.0);
  fixtures.put("elevation/8_0.asc", terrain::write_esri_ascii(clash));
  DataSource fresh(cfg, kOrigin);
  CHECK(error_of([&] { fresh.load_heightgrid(Rect(Point2D(2, 1), Point2D(13, 7))); }) == ErrorCode::DecodeError);
}

TEST_CASE("ingest: dataset frame offset and cropping") {
  TempDir fixtures;
  // Dataset origin 100 m east and 50 m north of the scene origin.
  const geom::GeoPoint dataset = geom::unproject_from_scene(Point2D(100, 50), kOrigin);
  fixtures.put("elevation/0_0.asc", terrain::write_esri_ascii(grid(500, Point2D(0, 0), 1.0, 4.0)));
  auto cfg = SourceConfig::offline_fixtures(fixtures.path.string(), dataset);
  DataSource src(cfg, kOrigin);
  CHECK((src.dataset_offset() - Point2D(100, 50)).norm() < 1e-6);
  const auto hf = src.load_heightgrid(Rect(Point2D(300, 200), Point2D(310, 210)));
  CHECK(hf.extent().contains(Rect(Point2D(300, 200), Point2D(310, 210))));
  // Region plus a 64 m margin, to within one cell of rounding.
  CHECK(hf.ncols >= 10 + 2 * 64);
  CHECK(hf.ncols <= 10 + 2 * 64 + 2);
  CHECK(std::abs(hf.origin.x() - (300 - 64)) <= 1.0 + 1e-6);
  // Dataset cell centres land on the offset grid.
  const double frac = std::fmod(hf.origin.x() - src.dataset_offset().x(), 1.0);
  CHECK(std::min(std::abs(frac), std::abs(1 - std::abs(frac))) < 1e-9);
}

TEST_CASE("ingest: building tileset selection") {
  TempDir fixtures;
  auto vol = [](double cx, double cy, double h) { return json{{"box", {cx, cy, 20, h, 0, 0, 0, h, 0, 0, 0, 20}}}; };
  json root = {{"boundingVolume", vol(100, 100, 100)}, {"geometricError", 50}, {"children", json::array()}};
  const char* names[] = {"sw.b3dm", "se.b3dm", "nw.b3dm", "ne.b3dm"};
  for (int q = 0; q < 4; ++q) {
    root["children"].push_back({{"boundingVolume", vol(q % 2 ? 150 : 50, q / 2 ? 150 : 50, 50)}, {"content", {{"uri", names[q]}}}});
  }
  fixtures.put("buildings/tileset.json", json({{"asset", {{"version", "1.0"}}}, {"root", root}}).dump());
  DataSource src(SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin), kOrigin);
  const auto one = src.fetch_building_tileset(Rect(Point2D(120, 130), Point2D(180, 190)));
  REQUIRE(one.contents.size() == 1);
  CHECK(one.contents[0].uri == "ne.b3dm");
  CHECK(src.fetch_building_tileset(Rect(Point2D(-5, -5), Point2D(205, 205))).contents.size() == 4);

  fixtures.put("buildings/tileset.json", "{\"root\": ");
  DataSource fresh(SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin), kOrigin);
  CHECK(error_of([&] { fresh.fetch_building_tileset(Rect(Point2D(0, 0), Point2D(1, 1))); }) == ErrorCode::DecodeError);
}

TEST_CASE("ingest: tree raster tiles") {
  TempDir fixtures;
  const TileAddress addr = origin_tile(16, "trees");
  GrayImage img(32, 32);
  for (int r = 2; r < 6; ++r) {
    for (int c = 2; c < 6; ++c) img.at(r, c) = 100;
  }
  for (int r = 20; r < 24; ++r) {
    for (int c = 28; c < 32; ++c) img.at(r, c) = 200;  // touches the east edge
  }
  fixtures.put("trees/" + addr.path() + ".pgm", write_pgm(img));
  TileAddress empty = addr;
  empty.y += 1;
  fixtures.put("trees/" + empty.path() + ".pgm", write_pgm(GrayImage(32, 32)));

  DataSource src(SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin), kOrigin);
  const auto raster = src.load_tree_raster(addr);
  CHECK(raster.pixels.pixels == img.pixels);
  CHECK(raster.bounds.isApprox(tile_scene_bounds(addr, kOrigin)));
  CHECK(raster.pixels.at(21, 31) == 200);
  const auto none = src.load_tree_raster(empty);
  CHECK(std::all_of(none.pixels.pixels.begin(), none.pixels.pixels.end(), [](auto v) { return v == 0; }));
}

TEST_CASE("ingest: aerial mosaic") {
  TempDir fixtures;
  RgbImage a(4, 4, Rgb{255, 0, 0}), b(4, 4, Rgb{0, 0, 255});
  fixtures.put("aerial/0_0.ppm", write_ppm(a, Rect(Point2D(0, 0), Point2D(8, 8))));
  fixtures.put("aerial/0_8.ppm", write_ppm(b, Rect(Point2D(0, 8), Point2D(8, 16))));
  auto cfg = SourceConfig::offline_fixtures(fixtures.path.string(), kOrigin);
  cfg.aerial_tile_size = 8;
  DataSource src(cfg, kOrigin);
  const auto img = src.load_aerial_image(Rect(Point2D(1, 1), Point2D(7, 15)));
  CHECK(img.image.width == 4);
  CHECK(img.image.height == 8);
  CHECK(img.bounds.isApprox(Rect(Point2D(0, 0), Point2D(8, 16))));
  CHECK(img.image.at(0, 0) == Rgb{0, 0, 255});  // north row is the upper tile
  CHECK(img.image.at(7, 0) == Rgb{255, 0, 0});

  fixtures.put("aerial/0_0.ppm", write_ppm(a, Rect(Point2D(0, 0), Point2D(9, 8))));
  DataSource fresh(cfg, kOrigin);
  CHECK(error_of([&] { fresh.load_aerial_image(Rect(Point2D(1, 1), Point2D(7, 7))); }) == ErrorCode::DecodeError);
}

TEST_CASE("ingest: configuration validation") {
  SourceConfig cfg;
  cfg.offline = true;
  cfg.sources[Source::Elevation] = SourceLocator{true, "", ""};
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  cfg.sources[Source::Elevation].enabled = false;
  CHECK_NOTHROW(cfg.validate());
  cfg.offline = false;
  cfg.sources[Source::Trees] = SourceLocator{true, "/tmp", ""};
  CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);

  // A disabled source fails loudly when asked for.
  SourceConfig partial = SourceConfig::offline_fixtures("/nonexistent", kOrigin);
  partial.sources[Source::Aerial].enabled = false;
  DataSource src(partial, kOrigin);
  CHECK(error_of([&] { src.fetch_bytes(Source::Aerial, "0_0.ppm"); }) == ErrorCode::FixtureMissing);
}

namespace {

class FakeTransport : public Transport {
 public:
  std::atomic<int> calls{0};
  std::vector<std::string> urls;
  std::mutex m;
  bool fail = false;
  std::string get(const std::string& url) override {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    std::lock_guard lock(m);
    urls.push_back(url);
    if (fail) throw Error(ErrorCode::SourceUnavailable, url + ": HTTP 503");
    return "payload:" + url;
  }
};

}  // namespace

TEST_CASE("ingest: online mode through a transport") {
  TempDir cache;
  SourceConfig cfg;
  cfg.offline = false;
  cfg.cache_dir = cache.path.string();
  cfg.sources[Source::Landcover] = SourceLocator{true, "", "http://tiles.example/lc/{path}?v=2"};
  cfg.sources[Source::Elevation] = SourceLocator{true, "", "http://dem.example/grid"};
  auto t = std::make_shared<FakeTransport>();
  DataSource src(cfg, kOrigin, t);
  CHECK(src.fetch_bytes(Source::Landcover, "15/1/2.geojson") == "payload:http://tiles.example/lc/15/1/2.geojson?v=2");
  CHECK(src.fetch_bytes(Source::Elevation, "0_0.asc") == "payload:http://dem.example/grid/0_0.asc");

  // Concurrent fetches of one key reach the network once.
  std::vector<std::jthread> threads;
  std::atomic<int> mismatches{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      if (src.fetch_bytes(Source::Elevation, "500_0.asc") != "payload:http://dem.example/grid/500_0.asc") ++mismatches;
    });
  }
  threads.clear();
  CHECK(mismatches == 0);
  CHECK(t->calls == 3);

  t->fail = true;
  CHECK(error_of([&] { src.fetch_bytes(Source::Elevation, "missing.asc"); }) == ErrorCode::SourceUnavailable);
  CHECK(!fs::exists(cache.path / "elevation" / "missing.asc"));
}
