#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "geoscene/vegetation.hpp"
#include "support/expect_error.hpp"
#include "support/vegetation_oracles.hpp"

using namespace geoscene;
using namespace geoscene::vegetation;
using geoscene::testing::error_of;
using geom::Rect;

using namespace geoscene::testing;

TEST_CASE("crowns: two disjoint blobs") {
  auto r = make_raster(20, 10, Rect(Point2D(0, 0), Point2D(20, 10)));
  for (int i = 0; i < 10; ++i) {
    r.pixels.at(1 + i / 5, 1 + i % 5) = 100;
    r.pixels.at(6 + i / 5, 12 + i % 5) = 200;
  }
  const auto crowns = detect_crowns(r);
  REQUIRE(crowns.size() == 2);
  CHECK(crowns.size() == oracle_crowns(r.pixels, r.bounds).size());
  CHECK(crowns[0].pixel_count == 10);
  CHECK(crowns[0].size_class == SizeClass::Medium);
  CHECK(crowns[1].size_class == SizeClass::Large);
  CHECK(crowns[0].crown_radius == doctest::Approx(std::sqrt(10.0 / std::numbers::pi)));
  CHECK(crowns[0].position.isApprox(Point2D(3.5, 10 - 2.0)));
}

TEST_CASE("crowns: empty raster and noise suppression") {
  auto r = make_raster(16, 16, Rect(Point2D(0, 0), Point2D(8, 8)));
  CHECK(detect_crowns(r).empty());
  r.pixels.at(3, 3) = 50;
  r.pixels.at(4, 4) = 50;  // diagonal pair, 2 pixels
  CHECK(detect_crowns(r).empty());
  r.pixels.at(5, 5) = 50;
  CHECK(detect_crowns(r).size() == 1);
  CrownParams loose;
  loose.min_pixels = 1;
  r.pixels.at(10, 10) = 9;
  CHECK(detect_crowns(r, loose).size() == 2);
}

TEST_CASE("crowns: symmetric blob centroid") {
  auto r = make_raster(31, 31, Rect(Point2D(100, 200), Point2D(131, 231)));
  disk(r.pixels, 15, 15, 6.3, 90);
  const auto crowns = detect_crowns(r);
  REQUIRE(crowns.size() == 1);
  CHECK((crowns[0].position - Point2D(115.5, 215.5)).norm() < 0.5 * r.pixel_width());
  CHECK(crowns[0].size_class == SizeClass::Medium);
}

TEST_CASE("crowns: size table edges") {
  SizeTable t;
  CHECK(t.classify(1) == SizeClass::Small);
  CHECK(t.classify(85) == SizeClass::Small);
  CHECK(t.classify(85.5) == SizeClass::Medium);
  CHECK(t.classify(170) == SizeClass::Medium);
  CHECK(t.classify(171) == SizeClass::Large);
}

TEST_CASE("crowns: counts and centroids match the union-find oracle") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 8 + static_cast<int>(rng() % 80), h = 8 + static_cast<int>(rng() % 80);
    auto r = make_raster(w, h, Rect(Point2D(-50, 30), Point2D(-50 + w * 0.5, 30 + h * 0.5)));
    r.pixels = random_crowns(rng, w, h);
    const auto crowns = detect_crowns(r);
    const auto oracle = oracle_crowns(r.pixels, r.bounds);
    REQUIRE(crowns.size() == oracle.size());
    std::vector<Point2D> oc;
    for (const auto& o : oracle) oc.push_back(o.centroid);
    CHECK(max_centroid_gap(positions(crowns), oc) < 1e-9);
    for (const auto& c : crowns) {
      CHECK(c.crown_radius > 0);
      const auto it = std::find_if(oracle.begin(), oracle.end(), [&](const OracleCrown& o) { return (o.centroid - c.position).norm() < 1e-9; });
      REQUIRE(it != oracle.end());
      CHECK(it->pixels == c.pixel_count);
      CHECK(it->mean == doctest::Approx(c.mean_value));
      CHECK(it->hull_box.contains(c.position));
    }
  }
}

TEST_CASE("merge: crown split evenly across a vertical edge") {
  auto whole = make_raster(40, 20, Rect(Point2D(0, 0), Point2D(40, 20)));
  disk(whole.pixels, 9.5, 19.5, 5, 150);
  const auto tiles = split4(whole, 20, 20 - 0);
  std::map<TileAddress, CrownRaster> two;
  for (const auto& [a, t] : tiles) {
    if (t.pixels.height > 0) two.emplace(a, t);
  }
  const auto merged = detect_and_merge(two);
  REQUIRE(merged.size() == 1);
  CHECK(std::abs(merged[0].position.x() - 20.0) < 0.5);
  const auto unsplit = detect_crowns(whole);
  CHECK((merged[0].position - unsplit[0].position).norm() < 1e-9);
  CHECK(merged[0].pixel_count == unsplit[0].pixel_count);
  CHECK(merged[0].crown_radius == doctest::Approx(unsplit[0].crown_radius));
}

TEST_CASE("merge: interior crowns pass through unchanged") {
  auto whole = make_raster(40, 40, Rect(Point2D(0, 0), Point2D(20, 20)));
  disk(whole.pixels, 8, 8, 3, 40);
  disk(whole.pixels, 30, 30, 4, 240);
  const auto tiles = split4(whole, 20, 20);
  std::map<TileAddress, std::vector<TreeInstance>> per_tile;
  std::vector<TreeInstance> all;
  for (const auto& [addr, t] : tiles) {
    per_tile[addr] = detect_crowns(t);
    all.insert(all.end(), per_tile[addr].begin(), per_tile[addr].end());
  }
  const auto merged = merge_cross_tile(per_tile, tiles);
  REQUIRE(merged.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(merged[i].position == all[i].position);
    CHECK(merged[i].tile == all[i].tile);
    CHECK(merged[i].pixel_count == all[i].pixel_count);
  }
}

TEST_CASE("merge: disjoint runs on the same edge stay separate") {
  auto whole = make_raster(20, 20, Rect(Point2D(0, 0), Point2D(20, 20)));
  for (int r = 2; r < 6; ++r) {
    for (int c = 7; c < 10; ++c) whole.pixels.at(r, c) = 100;  // crown A, left tile
  }
  for (int r = 8; r < 12; ++r) {
    for (int c = 10; c < 13; ++c) whole.pixels.at(r, c) = 100;  // crown B, right tile
  }
  auto tiles = split4(whole, 10, 20);
  std::erase_if(tiles, [](const auto& kv) { return kv.second.pixels.height == 0; });
  CHECK(detect_and_merge(tiles).size() == 2);

  // A diagonal touch across the edge is one crown under 8-connectivity.
  whole.pixels.at(6, 9) = 100;
  whole.pixels.at(7, 10) = 100;
  tiles = split4(whole, 10, 20);
  std::erase_if(tiles, [](const auto& kv) { return kv.second.pixels.height == 0; });
  CHECK(detect_and_merge(tiles).size() == 1);
  CHECK(detect_crowns(whole).size() == 1);
}

TEST_CASE("merge: 4-way tile split invariance") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 8 + static_cast<int>(rng() % 60), h = 8 + static_cast<int>(rng() % 60);
    auto whole = make_raster(w, h, Rect(Point2D(1000, -400), Point2D(1000 + w * 0.25, -400 + h * 0.25)));
    whole.pixels = random_crowns(rng, w, h);
    const int cc = 1 + static_cast<int>(rng() % (w - 1)), rc = 1 + static_cast<int>(rng() % (h - 1));
    const auto unsplit = detect_crowns(whole);
    const auto merged = detect_and_merge(split4(whole, cc, rc));
    REQUIRE(merged.size() == unsplit.size());
    CHECK(max_centroid_gap(positions(merged), positions(unsplit)) < 0.5 * 0.25);
  }
}

TEST_CASE("merge: inconsistent tiling") {
  auto whole = make_raster(20, 20, Rect(Point2D(0, 0), Point2D(20, 20)));
  auto tiles = split4(whole, 10, 10);
  tiles.begin()->second.bounds.max().x() += 0.5;
  CHECK(error_of([&] { detect_and_merge(tiles); }) == ErrorCode::InconsistentTiling);

  tiles = split4(whole, 10, 10);
  auto& t = tiles.begin()->second;
  t.pixels = GrayImage(10, 9);
  CHECK(error_of([&] { detect_and_merge(tiles); }) == ErrorCode::InconsistentTiling);
}

namespace {

terrain::HeightField flat_field(double z) {
  terrain::HeightField hf(50, 50, Point2D(0, 0), 2.0);
  hf.values.setConstant(z);
  return hf;
}

}  // namespace

TEST_CASE("placement: elevation, water drops and determinism") {
  const auto hf = flat_field(7.0);
  landcover::LandCoverRaster classes(10, Rect(Point2D(0, 0), Point2D(100, 100)), 1);
  classes.at(5, 5) = landcover::kWater;  // cell [50,60) x [50,60)

  TreeInstance a;
  a.position = {20, 20};
  a.crown_radius = 2;
  TreeInstance wet = a;
  wet.position = {55, 55};
  const auto placed = place_trees({a, wet}, hf, classes, 1);
  REQUIRE(placed.trees.size() == 1);
  CHECK(placed.dropped_on_water == 1);
  CHECK(placed.trees[0].elevation == 7.0);
  CHECK(placed.trees[0].model_key.rfind("tree_small_", 0) == 0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0, 100);
  std::vector<TreeInstance> many(100);
  for (std::size_t i = 0; i < many.size(); ++i) {
    many[i].position = {pos(rng), pos(rng)};
    many[i].size_class = static_cast<SizeClass>(i % 3);
    many[i].crown_radius = 1.5;
  }
  const auto p1 = place_trees(many, hf, classes, 99);
  const auto p2 = place_trees(many, hf, classes, 99);
  REQUIRE(p1.trees.size() == p2.trees.size());
  CHECK(p1.trees.size() + p1.dropped_on_water == 100);
  std::set<std::string> keys;
  for (std::size_t i = 0; i < p1.trees.size(); ++i) {
    CHECK(p1.trees[i].model_key == p2.trees[i].model_key);
    CHECK(p1.trees[i].model_key.find(to_string(p1.trees[i].size_class)) != std::string::npos);
    keys.insert(p1.trees[i].model_key);
  }
  CHECK(keys.size() > 3);  // variants actually vary
  CHECK(to_table(p1.trees) == to_table(p2.trees));
}

TEST_CASE("placement: table export") {
  TreeInstance t;
  t.position = {1.25, -3.5};
  t.elevation = 2.0;
  t.size_class = SizeClass::Large;
  t.crown_radius = 3.14159;
  t.model_key = "tree_large_1";
  CHECK(to_table({t}) == "x y z size_class crown_radius model_key\n1.250 -3.500 2.000 large 3.142 tree_large_1\n");
}
