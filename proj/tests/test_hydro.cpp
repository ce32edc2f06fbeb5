#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "geoscene/hydro.hpp"
#include "support/expect_error.hpp"
#include "support/hydro_oracles.hpp"

using namespace geoscene;
using namespace geoscene::hydro;
using geom::PolygonWithHoles;
using geom::Rect;
using geom::Ring;
using testing::error_of;

using testing::distance_to_rings;
using testing::field;
using testing::random_lake;
using testing::square;
using testing::star;


TEST_CASE("percentile uses nearest rank") {
  CHECK(percentile({1, 1, 1, 5}, 10) == 1.0);
  CHECK(percentile({5, 1, 1, 1}, 100) == 5.0);
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 1.0);
  CHECK(percentile(ten, 10) == 1.0);
  CHECK(percentile(ten, 11) == 2.0);
  CHECK(percentile(ten, 50) == 5.0);
  CHECK(percentile(ten, 0) == 1.0);
  CHECK(percentile({3.5}, 10) == 3.5);
  CHECK(error_of([] { percentile({}, 10); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { percentile({1}, 101); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("shore points sit outside at the offset") {
  const PolygonWithHoles sq(square(20, 20, 40, 40));
  const auto pts = shore_points(sq, 2.0);
  REQUIRE(pts.size() == 8);
  CHECK(pts[0].isApprox(Point2D(20 - std::sqrt(2.0), 20 - std::sqrt(2.0))));
  CHECK(pts[1].isApprox(Point2D(30, 18)));
  CHECK(pts[3].isApprox(Point2D(42, 30)));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lake = random_lake(rng, {100, 100}, 40);
    for (const auto& p : shore_points(lake, 2.0)) {
      CHECK_FALSE(geom::point_in_polygon(p, lake));
      CHECK(distance_to_rings(p, lake) > 0.5);
    }
  }
}

TEST_CASE("water level on a planar slope") {
  // z = x: the samples are the shore x coordinates, min is the left midpoint.
  const auto hf = field(32, 2.0, [](double x, double) { return x; });
  std::vector<ShoreSample> samples;
  const double level = estimate_water_level(PolygonWithHoles(square(20, 20, 40, 40)), hf, {}, &samples);
  CHECK(samples.size() == 8);
  CHECK(level == doctest::Approx(18.0).epsilon(1e-12));

  WaterParams p;
  p.percentile = 100;
  CHECK(estimate_water_level(PolygonWithHoles(square(20, 20, 40, 40)), hf, p) == doctest::Approx(42.0));
}

TEST_CASE("water level bounds and invalid samples") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const double a = u(rng), b = u(rng);
    const auto hf = field(40, 5.0, [&](double x, double y) { return a * std::sin(x / 17) + b * std::cos(y / 23); });
    const auto body = make_water_body(trial, random_lake(rng, {100, 100}, 50), hf);
    REQUIRE_FALSE(body.shore_samples.empty());
    double lo = 1e300, hi = -1e300;
    for (const auto& s : body.shore_samples) {
      lo = std::min(lo, s.elevation);
      hi = std::max(hi, s.elevation);
      CHECK(s.elevation == doctest::Approx(terrain::sample_height(hf, s.position)));
    }
    CHECK(body.surface_elevation >= lo);
    CHECK(body.surface_elevation <= hi);
  }

  // Nodata band on the west: samples there are skipped, not zero.
  auto hf = field(32, 2.0, [](double, double) { return 7.0; });
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 12; ++c) hf.values(r, c) = hf.nodata;
  std::vector<ShoreSample> s;
  CHECK(estimate_water_level(PolygonWithHoles(square(20, 20, 40, 40)), hf, {}, &s) == 7.0);
  CHECK(s.size() == 5);

  CHECK(error_of([&] { estimate_water_level(PolygonWithHoles(square(500, 500, 520, 520)), hf); }) ==
        ErrorCode::NoValidShoreSamples);
  auto dead = field(8, 1.0, [](double, double) { return -9999.0; });
  CHECK(error_of([&] { estimate_water_level(PolygonWithHoles(square(2, 2, 5, 5)), dead); }) ==
        ErrorCode::NoValidShoreSamples);
}

TEST_CASE("water mesh covers the clipped body") {
  std::mt19937_64 rng(23);
  const Rect west(Point2D(0, 0), Point2D(100, 200));
  const Rect east(Point2D(100, 0), Point2D(200, 200));
  const Rect whole(Point2D(0, 0), Point2D(200, 200));
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_real_distribution<double> cx(60, 140);
    WaterBody body;
    body.id = trial;
    body.region = random_lake(rng, {cx(rng), cx(rng)}, 55);
    body.surface_elevation = 3.25;

    const auto m = build_water_mesh(body, whole);
    const auto clipped = geom::clip_polygon_to_rect(body.region, whole);
    double expect = 0;
    for (const auto& c : clipped) expect += c.area();
    CHECK(m.area() == doctest::Approx(expect).epsilon(1e-6));

    const auto mw = build_water_mesh(body, west);
    const auto me = build_water_mesh(body, east);
    CHECK(mw.area() + me.area() == doctest::Approx(m.area()).epsilon(1e-6));

    for (const auto* mesh : {&m, &mw, &me}) {
      for (const auto& v : mesh->vertices) {
        CHECK(v.z() == 3.25);
        const Point2D p = v.head<2>();
        const bool inside = geom::point_in_polygon(p, body.region) || distance_to_rings(p, body.region) <= 0.01;
        CHECK(inside);
      }
      for (const auto& t : mesh->triangles) {
        const auto& a = mesh->vertices[t[0]];
        const auto& b = mesh->vertices[t[1]];
        const auto& c = mesh->vertices[t[2]];
        CHECK(geom::orient2d<double>(a.head<2>(), b.head<2>(), c.head<2>()) > 0);
      }
    }
    for (const auto& v : mw.vertices) CHECK(v.x() <= 100 + 1e-9);
    for (const auto& v : me.vertices) CHECK(v.x() >= 100 - 1e-9);
  }

  WaterBody far;
  far.region = PolygonWithHoles(square(300, 300, 310, 310));
  CHECK(build_water_mesh(far, whole).empty());
}

TEST_CASE("water polygons are taken from class 0 only") {
  FeatureCollection fc;
  fc.features.push_back({PolygonWithHoles(square(0, 0, 10, 10), {square(2, 2, 4, 4)}, 0), {}});
  fc.features.push_back({PolygonWithHoles(square(0, 0, 10, 10), {}, 1), {}});
  fc.features.push_back({PolygonWithHoles({{0, 0}, {10, 10}, {10, 0}, {0, 10}}, {}, 0), {}});
  const auto w = extract_water_polygons(fc);
  REQUIRE(w.size() == 1);
  CHECK(w[0].holes().size() == 1);
  CHECK(w[0].area() == doctest::Approx(96.0));
}

TEST_CASE("water cells aggregate into 8-connected regions") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 80; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 20);
    const Rect bounds(Point2D(-50, 10), Point2D(-50 + 3.0 * n, 10 + 3.0 * n));
    const auto raster = testing::random_water_raster(rng, n, bounds);
    auto uf = testing::water_components(raster);
    const auto expect = testing::component_sizes(raster, uf);

    const auto regions = aggregate_water_cells(raster);
    std::multiset<std::size_t> got;
    std::size_t rect_cells = 0;
    for (const auto& reg : regions) {
      got.insert(reg.cell_count);
      CHECK(reg.area() == doctest::Approx(reg.cell_count * 9.0));
      // Every cell under a rect is water and in the same oracle component.
      std::set<int> roots;
      for (const auto& rc : reg.rects) {
        CHECK(reg.bounds.contains(rc));
        const int c0 = static_cast<int>(std::lround((rc.min().x() + 50) / 3.0));
        const int c1 = static_cast<int>(std::lround((rc.max().x() + 50) / 3.0));
        const int r0 = static_cast<int>(std::lround((rc.min().y() - 10) / 3.0));
        const int r1 = static_cast<int>(std::lround((rc.max().y() - 10) / 3.0));
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) {
            CHECK(raster.at(r, c) == 0);
            roots.insert(uf.find(r * n + c));
            ++rect_cells;
          }
      }
      CHECK(roots.size() == 1);
    }
    CHECK(got == expect);
    CHECK(rect_cells == std::count(raster.cells().begin(), raster.cells().end(), 0));
  }
}

TEST_CASE("shore snap closes every gap under the water edge") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto scene = testing::random_shore_scene(rng, trial);
    auto& mesh = scene.mesh;
    auto& bodies = scene.bodies;
    auto& meshes = scene.meshes;
    REQUIRE_FALSE(meshes[0].empty());

    const double floor_z = bodies[0].surface_elevation - kShoreDrop;
    double worst_before = 0;
    for (const auto& v : meshes[0].vertices)
      worst_before = std::max(worst_before, floor_z - terrain_height_at(mesh, v.head<2>()));

    const auto before = mesh.vertices;
    const auto moved = snap_shore(mesh, bodies, meshes, scene.hf.cell_size);
    if (worst_before > 1e-9) CHECK(moved > 0);

    for (const auto& v : meshes[0].vertices)
      CHECK(terrain_height_at(mesh, v.head<2>()) >= floor_z - 1e-9);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(mesh.vertices[i].head<2>() == before[i].head<2>());
      CHECK(mesh.vertices[i].z() >= before[i].z());
      if (mesh.vertices[i].z() != before[i].z()) {
        ++changed;
        CHECK(mesh.vertices[i].z() == floor_z);
      }
    }
    CHECK(changed == moved);
  }
}

TEST_CASE("terrain height lookup matches a brute-force triangle scan") {
  std::mt19937_64 rng(1);
  const auto hf = field(16, 4.0, [](double x, double y) { return std::sin(x / 9) * 4 + 0.1 * y; });
  for (int depth = 1; depth <= 5; ++depth) {
    terrain::LodParams lp;
    lp.base_cell = 64;
    lp.max_depth = depth;
    lp.viewpoint = Point3D(10, 50, 20);
    const auto mesh = terrain::build_lod_mesh(hf, landcover::LandCoverRaster(8, hf.extent(), 1), lp);
    for (const auto& v : mesh.vertices) CHECK(terrain_height_at(mesh, v.head<2>()) == doctest::Approx(v.z()));
    std::uniform_real_distribution<double> u(0, 64);
    for (int i = 0; i < 300; ++i) {
      const Point2D p(u(rng), u(rng));
      double expect = 0;
      bool found = false;
      for (const auto& t : mesh.triangles) {
        const Point2D a = mesh.vertices[t[0]].head<2>(), b = mesh.vertices[t[1]].head<2>(),
                      c = mesh.vertices[t[2]].head<2>();
        const double area = geom::orient2d(a, b, c);
        const double w0 = geom::orient2d(b, c, p) / area, w1 = geom::orient2d(c, a, p) / area,
                     w2 = geom::orient2d(a, b, p) / area;
        if (w0 >= 0 && w1 >= 0 && w2 >= 0) {
          expect = w0 * mesh.vertices[t[0]].z() + w1 * mesh.vertices[t[1]].z() + w2 * mesh.vertices[t[2]].z();
          found = true;
          break;
        }
      }
      REQUIRE(found);
      CHECK(terrain_height_at(mesh, p) == doctest::Approx(expect).epsilon(1e-9));
    }
    CHECK(error_of([&] { terrain_height_at(mesh, Point2D(-5, 3)); }) == ErrorCode::OutOfBounds);
  }
}

TEST_CASE("audit table lists every sample") {
  const auto hf = field(32, 2.0, [](double x, double) { return x; });
  const auto body = make_water_body(4, PolygonWithHoles(square(20, 20, 40, 40)), hf);
  const auto text = audit_table(body);
  CHECK(text.rfind("# body 4 level 18.000 percentile 10 offset 2 samples 8\nx y z\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  CHECK(text.find("30.000 18.000 30.000\n") != std::string::npos);
}
