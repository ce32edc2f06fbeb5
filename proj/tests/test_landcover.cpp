#include <algorithm>
#include <random>

#include "doctest.h"
#include "geoscene/landcover.hpp"
#include "support/geom_oracles.hpp"
#include "support/landcover_oracles.hpp"

using namespace geoscene;
using namespace geoscene::geom;
using namespace geoscene::landcover;
using geoscene::testing::random_holed_polygon;
using geoscene::testing::square;

using geoscene::testing::feature;
using geoscene::testing::lattice_rect;
using geoscene::testing::moved;
using geoscene::testing::raster_oracle;

TEST_CASE("class table: defaults reserve water and parse round-trips") {
  const auto table = ClassTable::defaults();
  REQUIRE(table.find(kWater) != nullptr);
  CHECK(table.find(kWater)->name == "water");
  CHECK(table.find(ClassCode{1})->name == "grass");
  CHECK(table.find("cycle_lane")->code == 2);
  const auto again = ClassTable::parse(table.to_text());
  CHECK(again.to_text() == table.to_text());
  CHECK(table.priority(0) < table.priority(3));  // water beats road
  CHECK(table.priority(3) < table.priority(1));  // road beats grass
  CHECK(table.priority(1) < table.priority(6));  // grass beats built-up
}

TEST_CASE("class table: parse errors and duplicates") {
  CHECK_THROWS_AS(ClassTable::parse("0 water water\n0 lake water\n"), Error);
  CHECK_THROWS_AS(ClassTable::parse("x water water\n"), Error);
  CHECK_THROWS_AS(ClassTable::parse("3 road asphalt motorway\n"), Error);
  const auto t = ClassTable::parse("# comment\n\n0 water w\n9 rock r generic  # trailing\n");
  CHECK(t.entries().size() == 2);
  CHECK(t.find(ClassCode{9})->texture_key == "r");
}

TEST_CASE("rasterize: single grass polygon covering the bounds") {
  const Rect bounds(Point2D(0, 0), Point2D(4, 4));
  FeatureCollection fc{{feature(square(0, 0, 4, 4), 1)}, bounds, 0};
  const auto raster = rasterize_classes(fc, 4, bounds);
  CHECK(std::all_of(raster.cells().begin(), raster.cells().end(), [](auto c) { return c == 1; }));
}

TEST_CASE("rasterize: left water, right grass") {
  const Rect bounds(Point2D(0, 0), Point2D(4, 4));
  FeatureCollection fc{{feature(square(0, 0, 2, 4), 0), feature(square(2, 0, 4, 4), 1)}, bounds, 0};
  const auto raster = rasterize_classes(fc, 4, bounds);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) CHECK(raster.at(r, c) == (c < 2 ? 0 : 1));
  }
  const auto expect = raster_oracle(fc, 4, bounds, ClassTable::defaults());
  CHECK(raster.cells() == expect.cells());
}

TEST_CASE("rasterize: grass with a hole leaves the hole unknown") {
  const Rect bounds(Point2D(0, 0), Point2D(8, 8));
  FeatureCollection fc{{feature(square(0, 0, 8, 8), 1, {square(2, 2, 6, 6)})}, bounds, 0};
  const auto raster = rasterize_classes(fc, 8, bounds);
  const auto expect = raster_oracle(fc, 8, bounds, ClassTable::defaults());
  CHECK(raster.cells() == expect.cells());
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const bool in_hole = r >= 2 && r < 6 && c >= 2 && c < 6;
      CHECK(raster.at(r, c) == (in_hole ? kUnknown : 1));
    }
  }

  // A water feature filling the hole takes those cells over.
  fc.features.push_back(feature(square(2, 2, 6, 6), 0));
  const auto filled = rasterize_classes(fc, 8, bounds);
  CHECK(filled.at(3, 3) == 0);
  CHECK(filled.at(0, 0) == 1);
}

TEST_CASE("rasterize: agrees with the brute-force oracle on random overlapping features") {
  std::mt19937_64 rng(0x1a2b);
  const auto table = ClassTable::defaults();
  std::uniform_int_distribution<int> code(0, 8);
  std::uniform_real_distribution<double> pos(0.0, 200.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Rect bounds(Point2D(0, 0), Point2D(200, 200));
    const int n = 32 + trial;
    FeatureCollection fc;
    fc.bounds = bounds;
    for (int k = 0; k < 6; ++k) {
      const auto base = random_holed_polygon(rng, 3, 40.0 + 10.0 * k);
      fc.features.push_back({moved(base, Point2D(pos(rng), pos(rng)), static_cast<ClassCode>(code(rng))), {}});
    }
    for (int k = 0; k < 4; ++k) {
      fc.features.push_back(feature(lattice_rect(rng, n, 200.0 / n), static_cast<ClassCode>(code(rng))));
    }
    const auto got = rasterize_classes(fc, n, bounds, table);
    const auto expect = raster_oracle(fc, n, bounds, table);
    REQUIRE(got.cells() == expect.cells());
  }
}

TEST_CASE("rasterize: result does not depend on feature order") {
  std::mt19937_64 rng(77);
  const Rect bounds(Point2D(0, 0), Point2D(100, 100));
  std::uniform_int_distribution<int> code(0, 8);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureCollection fc;
    for (int k = 0; k < 8; ++k) {
      fc.features.push_back(feature(lattice_rect(rng, 40, 2.5), static_cast<ClassCode>(code(rng))));
    }
    const auto a = rasterize_classes(fc, 40, bounds);
    std::shuffle(fc.features.begin(), fc.features.end(), rng);
    const auto b = rasterize_classes(fc, 40, bounds);
    CHECK(a.cells() == b.cells());
  }
}

TEST_CASE("rasterize: doubling n never contradicts containment") {
  std::mt19937_64 rng(5);
  const Rect bounds(Point2D(0, 0), Point2D(100, 100));
  std::uniform_real_distribution<double> pos(20.0, 80.0);
  std::uniform_int_distribution<int> code(0, 8);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureCollection fc;
    for (int k = 0; k < 4; ++k) {
      const auto base = random_holed_polygon(rng, 2, 30.0);
      fc.features.push_back({moved(base, Point2D(pos(rng), pos(rng)), static_cast<ClassCode>(code(rng))), {}});
    }
    const int n = 25;
    const auto coarse = rasterize_classes(fc, n, bounds);
    const auto fine = rasterize_classes(fc, 2 * n, bounds);
    const Point2D cs = coarse.cell_size();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        // Cell fully inside exactly one feature and touching no other: its
        // four children must agree.
        const Rect cell(bounds.min() + Point2D(c * cs.x(), r * cs.y()),
                        bounds.min() + Point2D((c + 1) * cs.x(), (r + 1) * cs.y()));
        int inside = 0, touching = 0;
        for (const auto& f : fc.features) {
          const auto pieces = clip_polygon_to_rect(f.polygon, cell);
          double a = 0;
          for (const auto& p : pieces) a += p.area();
          if (a > 0) ++touching;
          if (a >= cell.volume() * (1 - 1e-12)) ++inside;
        }
        if (inside != 1 || touching != 1) continue;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) CHECK(fine.at(2 * r + dr, 2 * c + dc) == coarse.at(r, c));
        }
      }
    }
  }
}

TEST_CASE("class_at: centres, shared edges and out-of-bounds") {
  const Rect bounds(Point2D(0, 0), Point2D(4, 4));
  LandCoverRaster raster(4, bounds);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) raster.at(r, c) = static_cast<ClassCode>(r * 4 + c);
  }
  CHECK(class_at(raster, raster.cell_center(2, 1)) == 9);
  CHECK(class_at(raster, Point2D(1.0, 0.5)) == 1);   // edge x=1 belongs to the cell to its right
  CHECK(class_at(raster, Point2D(0.5, 2.0)) == 8);   // edge y=2 belongs to the cell above
  CHECK(class_at(raster, Point2D(4.0, 4.0)) == 15);  // max corner clamps into the last cell
  CHECK(class_at(raster, Point2D(0.0, 0.0)) == 0);
  CHECK_THROWS_AS(class_at(raster, Point2D(-0.1, 1.0)), Error);
  CHECK_THROWS_AS(class_at(raster, Point2D(1.0, 4.01)), Error);
}

TEST_CASE("pgm dump is north-up with georeference") {
  const Rect bounds(Point2D(10, 20), Point2D(12, 22));
  LandCoverRaster raster(2, bounds, 1);
  raster.at(0, 0) = 0;  // south-west
  NetpbmHeader header;
  const auto img = read_pgm(to_pgm(raster), &header);
  CHECK(img.at(1, 0) == 0);
  CHECK(img.at(0, 0) == 1);
  REQUIRE(header.bounds.has_value());
  CHECK(header.bounds->min() == bounds.min());
}
