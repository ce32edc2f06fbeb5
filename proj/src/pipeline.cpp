#include "geoscene/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "geoscene/buildings.hpp"
#include "geoscene/transit.hpp"

namespace geoscene::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::optional<ingest::Source> source_from_name(const std::string& name) {
  for (auto s : ingest::kAllSources) {
    if (name == ingest::to_string(s)) return s;
  }
  return std::nullopt;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

GeoBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::InvalidArgument, "bbox needs 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

// -- request / config ------------------------------------------------------------------

void GenerationRequest::validate() const {
  if (!bbox.valid()) throw Error(ErrorCode::InvalidArgument, "bbox must have positive area");
  const auto size = scene_rect(bbox, scene_origin()).sizes();
  if (size.x() > max_extent + 1e-6 || size.y() > max_extent + 1e-6) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "bbox is %.0f x %.0f m, above the %.0f m limit", size.x(), size.y(), max_extent);
    throw Error(ErrorCode::InvalidArgument, buf);
  }
  if (raster_n < 1) throw Error(ErrorCode::InvalidArgument, "raster n must be >= 1");
  if (lod.max_depth < 0 || !(lod.base_cell > 0)) throw Error(ErrorCode::InvalidArgument, "bad lod parameters");
  if (!(fill_radius >= 0) || fill_min_samples < 1) throw Error(ErrorCode::InvalidArgument, "bad gap-fill parameters");
  sources.validate();
}

GeoBox parse_bbox(const std::string& text) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  GeoBox b;
  std::string rest;
  if (!(in >> b.min_lat >> b.min_lon >> b.max_lat >> b.max_lon) || (in >> rest)) {
    throw Error(ErrorCode::InvalidArgument, "bbox must be min_lat,min_lon,max_lat,max_lon: " + text);
  }
  return b;
}

GenerationRequest request_from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  GenerationRequest req;
  try {
    auto& src = req.sources;
    src.offline = doc.value("offline", true);
    if (doc.contains("dataset_origin")) {
      const auto& o = doc["dataset_origin"];
      src.dataset_origin = {o.at("lat").get<double>(), o.at("lon").get<double>()};
    }
    src.cache_dir = resolve(base_dir, doc.value("cache_dir", std::string())).string();
    src.elevation_tile_size = doc.value("elevation_tile_size", src.elevation_tile_size);
    src.aerial_tile_size = doc.value("aerial_tile_size", src.aerial_tile_size);
    src.landcover_zoom = doc.value("landcover_zoom", src.landcover_zoom);
    src.tree_zoom = doc.value("tree_zoom", src.tree_zoom);

    const std::string fixtures = resolve(base_dir, doc.value("fixtures", std::string())).string();
    for (auto s : ingest::kAllSources) src.sources[s] = {true, fixtures, {}};
    if (doc.contains("sources")) {
      for (const auto& [name, j] : doc["sources"].items()) {
        const auto s = source_from_name(name);
        if (!s) throw Error(ErrorCode::InvalidArgument, "unknown source '" + name + "'");
        auto& loc = src.sources[*s];
        loc.enabled = j.value("enabled", true);
        if (j.contains("fixtures")) loc.fixture_dir = resolve(base_dir, j["fixtures"].get<std::string>()).string();
        loc.base_url = j.value("url", std::string());
      }
    }

    if (doc.contains("class_table")) {
      req.classes = landcover::ClassTable::parse(
          ingest::read_file(resolve(base_dir, doc["class_table"].get<std::string>())));
    }
    if (doc.contains("transit_network")) {
      req.transit_network = resolve(base_dir, doc["transit_network"].get<std::string>());
    }

    const json d = doc.value("defaults", json::object());
    if (d.contains("bbox")) req.bbox = bbox_from_json(d["bbox"]);
    req.raster_n = d.value("n", req.raster_n);
    req.seed = d.value("seed", req.seed);
    req.max_extent = d.value("max_extent", req.max_extent);
    if (d.contains("output")) req.output = d["output"].get<std::string>();
    if (d.contains("lod")) {
      const auto& l = d["lod"];
      req.lod.base_cell = l.value("base_cell", req.lod.base_cell);
      req.lod.max_depth = l.value("max_depth", req.lod.max_depth);
      req.lod.split_threshold = l.value("split_threshold", req.lod.split_threshold);
      if (l.contains("viewpoint_offset")) {
        const auto& v = l["viewpoint_offset"];
        req.viewpoint_offset = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
      }
    }
    if (d.contains("fill")) {
      req.fill_radius = d["fill"].value("max_radius", req.fill_radius);
      req.fill_min_samples = d["fill"].value("min_samples", req.fill_min_samples);
    }
    if (d.contains("water")) {
      req.water.shore_offset = d["water"].value("shore_offset", req.water.shore_offset);
      req.water.percentile = d["water"].value("percentile", req.water.percentile);
    }
    if (d.contains("crowns")) {
      const auto& c = d["crowns"];
      req.crowns.min_pixels = c.value("min_pixels", req.crowns.min_pixels);
      req.crowns.sizes.small_max = c.value("small_max", req.crowns.sizes.small_max);
      req.crowns.sizes.medium_max = c.value("medium_max", req.crowns.sizes.medium_max);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return req;
}

GenerationRequest load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::InvalidArgument, "config not found: " + path.string());
  json doc;
  try {
    doc = json::parse(ingest::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config " + path.string() + ": " + e.what());
  }
  return request_from_json(doc, path.parent_path());
}

namespace {

// what() of an Error already starts with "<code>: ".
std::string bare_message(const Error& e) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  return msg;
}

}  // namespace

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage " + stage + ": " + bare_message(cause)), stage_(std::move(stage)) {}

// -- stages ------------------------------------------------------------------------------

namespace {

/// Runs `fn` as stage `name`: errors get the stage name, timing is recorded.
template <class Fn>
void run_stage(const char* name, std::vector<StageTiming>& timings,
               const std::function<void(const StageTiming&)>& on_stage, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, Error(ErrorCode::DecodeError, e.what()));
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  timings.push_back({name, dt.count()});
  if (on_stage) on_stage(timings.back());
}

/// Features of every covering tile. Polygons repeated in several tiles
/// (same "id" attribute) are kept once.
FeatureCollection load_landcover(ingest::DataSource& src, const GenerationRequest& req, const geom::Rect& bounds,
                                 ordered_json& stats) {
  FeatureCollection fc;
  fc.bounds = bounds;
  std::set<std::string> seen;
  std::size_t repeats = 0;
  const auto tiles = tiles_covering(req.bbox, req.sources.landcover_zoom, "landcover");
  for (const auto& addr : tiles) {
    auto tile = src.fetch_vector_tile(addr, req.classes);
    fc.dropped += tile.dropped;
    for (auto& f : tile.features) {
      const auto id = f.attributes.find("id");
      if (id != f.attributes.end() && !seen.insert(id->second).second) {
        ++repeats;
        continue;
      }
      fc.features.push_back(std::move(f));
    }
  }
  stats["tiles"] = tiles.size();
  stats["features"] = fc.features.size();
  stats["repeated_features"] = repeats;
  stats["dropped_features"] = fc.dropped;
  return fc;
}

std::vector<buildings::BuildingMesh> load_buildings(ingest::DataSource& src, const GenerationRequest& req,
                                                    const geom::Rect& bounds, bool decorate, ordered_json& stats) {
  const auto index = src.fetch_building_tileset(bounds);
  std::vector<buildings::BuildingMesh> out;
  for (const auto& c : index.contents) {
    const auto payload = buildings::parse_b3dm(src.fetch_bytes(ingest::Source::Buildings, c.uri));
    buildings::SplitOptions opt;
    opt.transform = c.transform;
    for (auto& m : buildings::split_by_batch(payload, opt)) out.push_back(std::move(m));
  }
  stats["tileset_nodes"] = index.nodes.size();
  stats["contents"] = index.contents.size();
  stats["buildings"] = out.size();
  if (out.empty()) return out;

  const ColorRaster aerial = src.load_aerial_image(bounds);
  if (!decorate) return out;
  std::size_t fallback = 0;
  for (auto& m : out) {
    m = buildings::compute_uv(m);
    m = buildings::assign_roof_color(m, aerial);
    if (m.roof_color == buildings::kFallbackRoofColor) ++fallback;
    m.facade_texture = buildings::pick_facade_texture(m, req.seed);
  }
  stats["fallback_roof_colors"] = fallback;
  return out;
}

std::vector<vegetation::TreeInstance> load_crowns(ingest::DataSource& src, const GenerationRequest& req,
                                                  ordered_json& stats) {
  std::map<TileAddress, std::vector<vegetation::TreeInstance>> per_tile;
  std::map<TileAddress, vegetation::CrownRaster> rasters;
  std::size_t detected = 0;
  for (const auto& addr : tiles_covering(req.bbox, req.sources.tree_zoom, "trees")) {
    auto raster = src.load_tree_raster(addr);
    auto found = vegetation::detect_crowns(raster, req.crowns);
    detected += found.size();
    per_tile[addr] = std::move(found);
    rasters[addr] = std::move(raster);
  }
  auto merged = vegetation::merge_cross_tile(per_tile, rasters, req.crowns);
  stats["tiles"] = rasters.size();
  stats["detected"] = detected;
  stats["merged"] = merged.size();
  return merged;
}

std::vector<scene::Track> load_tracks(const GenerationRequest& req, const geom::GeoPoint& origin,
                                      const terrain::HeightField& hf) {
  std::vector<scene::Track> tracks;
  if (req.transit_network.empty()) return tracks;
  const auto net = transit::load_network(ingest::read_file(req.transit_network));
  for (const auto& [id, route] : net.routes) {
    scene::Track t{id, route.destination(), {}};
    for (const auto& p : route.points()) {
      const auto q = geom::project_unchecked(geom::unproject_from_scene(p, net.origin), origin);
      t.points.emplace_back(q.x(), q.y(), terrain::sample_height_or(hf, q, 0.0));
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

ordered_json echo_request(const GenerationRequest& req) {
  ordered_json p;
  p["bbox"] = {req.bbox.min_lat, req.bbox.min_lon, req.bbox.max_lat, req.bbox.max_lon};
  p["n"] = req.raster_n;
  p["seed"] = req.seed;
  p["max_extent"] = req.max_extent;
  p["lod"] = {{"base_cell", req.lod.base_cell},
              {"max_depth", req.lod.max_depth},
              {"split_threshold", req.lod.split_threshold},
              {"viewpoint_offset", {req.viewpoint_offset.x(), req.viewpoint_offset.y(), req.viewpoint_offset.z()}}};
  p["fill"] = {{"max_radius", req.fill_radius}, {"min_samples", req.fill_min_samples}};
  p["water"] = {{"shore_offset", req.water.shore_offset}, {"percentile", req.water.percentile}};
  p["crowns"] = {{"min_pixels", req.crowns.min_pixels},
                 {"small_max", req.crowns.sizes.small_max},
                 {"medium_max", req.crowns.sizes.medium_max}};
  const auto& s = req.sources;
  ordered_json enabled = ordered_json::array();
  for (auto src : ingest::kAllSources) {
    if (s.locator(src).enabled) enabled.push_back(ingest::to_string(src));
  }
  p["sources"] = {{"offline", s.offline},
                  {"enabled", enabled},
                  {"dataset_origin", {s.dataset_origin.lat, s.dataset_origin.lon}},
                  {"elevation_tile_size", s.elevation_tile_size},
                  {"aerial_tile_size", s.aerial_tile_size},
                  {"landcover_zoom", s.landcover_zoom},
                  {"tree_zoom", s.tree_zoom}};
  p["class_table"] = req.classes.to_text();
  p["transit_network"] = req.transit_network.empty() ? ordered_json() : ordered_json(req.transit_network.filename().string());
  return p;
}

}  // namespace

GenerationResult generate(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport,
                          const std::function<void(const StageTiming&)>& on_stage) {
  req.validate();
  const geom::GeoPoint origin = req.scene_origin();
  const geom::Rect bounds = scene_rect(req.bbox, origin);
  ingest::DataSource src(req.sources, origin, std::move(transport));

  GenerationResult out;
  ordered_json stats;
  FeatureCollection features;
  landcover::LandCoverRaster classes;
  terrain::HeightField raw;
  terrain::FillResult filled;
  terrain::TerrainMesh terrain_mesh;
  std::vector<hydro::WaterMesh> water;
  std::vector<buildings::BuildingMesh> houses;
  std::vector<vegetation::TreeInstance> trees;

  run_stage("landcover", out.timings, on_stage, [&] {
    ordered_json st;
    features = load_landcover(src, req, bounds, st);
    classes = landcover::rasterize_classes(features, req.raster_n, bounds, req.classes);
    stats["landcover"] = st;
  });

  run_stage("elevation", out.timings, on_stage, [&] {
    raw = src.load_heightgrid(bounds);
    filled = terrain::fill_gaps(raw, req.fill_radius, req.fill_min_samples);
    if (filled.unfilled > 0) out.warnings.push_back(std::to_string(filled.unfilled) + " elevation cells left unfilled");
    terrain::LodParams lod = req.lod;
    const auto c = bounds.center();
    lod.viewpoint = geom::Point3D(c.x(), c.y(), 0.0) + req.viewpoint_offset;
    terrain_mesh = terrain::build_lod_mesh(filled.field, classes, lod);
    stats["elevation"] = {{"cells", static_cast<std::size_t>(raw.ncols) * raw.nrows},
                          {"gaps", raw.nodata_count()},
                          {"unfilled", filled.unfilled},
                          {"terrain_triangles", terrain_mesh.triangles.size()}};
  });

  run_stage("water", out.timings, on_stage, [&] {
    const auto polygons = hydro::extract_water_polygons(features);
    std::vector<hydro::WaterBody> bodies;
    std::size_t no_shore = 0;
    for (std::size_t i = 0; i < polygons.size(); ++i) {
      try {
        auto body = hydro::make_water_body(static_cast<int>(i), polygons[i], raw, req.water);
        auto mesh = hydro::build_water_mesh(body, bounds);
        if (mesh.empty()) continue;
        bodies.push_back(std::move(body));
        water.push_back(std::move(mesh));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidShoreSamples) throw;
        ++no_shore;
        out.warnings.push_back("water body " + std::to_string(i) + " has no valid shore samples");
      }
    }
    const std::size_t snapped = hydro::snap_shore(terrain_mesh, bodies, water, raw.cell_size);
    ordered_json levels = ordered_json::array();
    for (const auto& b : bodies) levels.push_back(b.surface_elevation);
    stats["water"] = {{"polygons", polygons.size()},
                      {"bodies", bodies.size()},
                      {"no_shore_samples", no_shore},
                      {"levels", levels},
                      {"snapped_vertices", snapped}};
  });

  run_stage("buildings", out.timings, on_stage, [&] {
    ordered_json st;
    houses = load_buildings(src, req, bounds, true, st);
    stats["buildings"] = st;
  });

  run_stage("trees", out.timings, on_stage, [&] {
    ordered_json st;
    auto crowns = load_crowns(src, req, st);
    std::vector<vegetation::TreeInstance> inside;
    for (auto& t : crowns) {
      if (bounds.contains(t.position)) inside.push_back(std::move(t));
    }
    st["outside_bbox"] = crowns.size() - inside.size();
    auto placed = vegetation::place_trees(std::move(inside), filled.field, classes, req.seed);
    st["dropped_on_water"] = placed.dropped_on_water;
    trees = std::move(placed.trees);
    stats["trees"] = st;
  });

  run_stage("assemble", out.timings, on_stage, [&] {
    scene::SceneInputs in;
    in.origin = origin;
    in.bounds = bounds;
    in.seed = req.seed;
    in.terrain = scene::Layer<terrain::TerrainMesh>{origin, std::move(terrain_mesh)};
    in.water = {origin, std::move(water)};
    in.buildings = {origin, std::move(houses)};
    in.trees = {origin, std::move(trees)};
    in.tracks = {origin, load_tracks(req, origin, filled.field)};
    out.scene = scene::assemble(in);
  });

  run_stage("export", out.timings, on_stage, [&] {
    ordered_json params = echo_request(req);
    params["stages"] = stats;
    params["warnings"] = out.warnings;
    out.glb = scene::export_glb(out.scene);
    out.manifest = scene::export_manifest(out.scene, params);
  });
  out.source_accesses = src.source_accesses();
  return out;
}

fs::path manifest_path(const fs::path& glb_path) {
  fs::path p = glb_path;
  p.replace_extension();
  p += ".manifest.json";
  return p;
}

void write_outputs(const GenerationResult& result, const fs::path& glb_path) {
  try {
    if (glb_path.has_parent_path()) fs::create_directories(glb_path.parent_path());
    ingest::write_file(glb_path, result.glb);
    ingest::write_file(manifest_path(glb_path), result.manifest);
  } catch (const Error& e) {
    throw StageError("export", e);
  } catch (const std::exception& e) {
    throw StageError("export", Error(ErrorCode::SerializationError, e.what()));
  }
}

// -- validation / prefetch ------------------------------------------------------------------

std::vector<StageCheck> dry_run(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport) {
  req.validate();
  const geom::GeoPoint origin = req.scene_origin();
  const geom::Rect bounds = scene_rect(req.bbox, origin);
  ingest::DataSource src(req.sources, origin, std::move(transport));

  std::vector<StageCheck> checks;
  auto check = [&](const char* name, auto&& fn) {
    StageCheck c{name, true, false, "ok", std::nullopt};
    try {
      fn(c);
    } catch (const Error& e) {
      c.ok = false;
      c.code = e.code();
      c.message = e.what();
    } catch (const std::exception& e) {
      c.ok = false;
      c.code = ErrorCode::DecodeError;
      c.message = e.what();
    }
    checks.push_back(std::move(c));
    return checks.back().ok;
  };

  std::optional<FeatureCollection> features;
  check("landcover", [&](StageCheck&) {
    ordered_json st;
    features = load_landcover(src, req, bounds, st);
  });
  check("elevation", [&](StageCheck&) { terrain::fill_gaps(src.load_heightgrid(bounds), req.fill_radius, req.fill_min_samples); });
  check("water", [&](StageCheck& c) {
    if (!features) {
      c.skipped = true;
      c.message = "skipped: needs land cover";
      return;
    }
    c.message = "ok: " + std::to_string(hydro::extract_water_polygons(*features).size()) + " water polygons";
  });
  check("buildings", [&](StageCheck&) {
    ordered_json st;
    load_buildings(src, req, bounds, false, st);
  });
  check("trees", [&](StageCheck&) {
    ordered_json st;
    load_crowns(src, req, st);
  });
  check("assemble", [&](StageCheck& c) {
    if (req.transit_network.empty()) return;
    const auto net = transit::load_network(ingest::read_file(req.transit_network));
    c.message = "ok: " + std::to_string(net.routes.size()) + " routes";
  });
  check("export", [&](StageCheck& c) { c.skipped = true; c.message = "nothing to load"; });
  return checks;
}

FetchReport prefetch(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport) {
  if (req.sources.cache_dir.empty()) throw Error(ErrorCode::InvalidArgument, "fetch needs a cache directory");
  req.validate();
  const geom::GeoPoint origin = req.scene_origin();
  const geom::Rect bounds = scene_rect(req.bbox, origin);
  ingest::DataSource src(req.sources, origin, std::move(transport));
  std::vector<StageTiming> timings;
  ordered_json st;
  run_stage("landcover", timings, {}, [&] { load_landcover(src, req, bounds, st); });
  run_stage("elevation", timings, {}, [&] { src.load_heightgrid(bounds); });
  run_stage("buildings", timings, {}, [&] { load_buildings(src, req, bounds, false, st); });
  run_stage("trees", timings, {}, [&] { load_crowns(src, req, st); });

  FetchReport r;
  for (auto s : ingest::kAllSources) r.accesses[s] = src.source_accesses(s);
  r.total_accesses = src.source_accesses();
  r.cache_hits = src.cache_hits();
  return r;
}

}  // namespace geoscene::pipeline
