// geoscene: scene generation, cache prefill and the transit snapshot service.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "geoscene/ingest.hpp"
#include "geoscene/pipeline.hpp"
#include "geoscene/transit.hpp"

namespace fs = std::filesystem;
using namespace geoscene;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;
constexpr const char* kCacheEnv = "GEOSCENE_CACHE_DIR";

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct SourceFlags {
  std::string config;
  std::string fixtures;
  std::string bbox;
  std::string cache_dir;
  bool offline = false;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> max_extent;
  std::string out;

  void add_to(CLI::App& cmd, bool generation) {
    cmd.add_option("--config", config, "JSON config (sources, class table, defaults)");
    cmd.add_option("--fixtures", fixtures, "fixture root for offline mode (reads DIR/config.json if present)");
    cmd.add_option("--bbox", bbox, "min_lat,min_lon,max_lat,max_lon");
    cmd.add_flag("--offline", offline, "read sources from fixtures only");
    cmd.add_option("--cache-dir", cache_dir, std::string("disk cache (overrides $") + kCacheEnv + ")");
    cmd.add_option("--max-extent", max_extent, "largest bbox side in metres");
    if (generation) {
      cmd.add_option("--n", n, "land-cover raster size");
      cmd.add_option("--seed", seed, "generation seed");
      cmd.add_option("--out", out, "output .glb (manifest is written next to it)");
    }
  }

  /// Config file < fixture config < environment < flags.
  pipeline::GenerationRequest resolve() const {
    pipeline::GenerationRequest req;
    for (auto s : ingest::kAllSources) req.sources.sources[s] = ingest::SourceLocator{};
    if (!config.empty()) {
      req = pipeline::load_config(config);
    } else if (!fixtures.empty() && fs::is_regular_file(fs::path(fixtures) / "config.json")) {
      req = pipeline::load_config(fs::path(fixtures) / "config.json");
    }
    if (!fixtures.empty()) {
      if (!fs::is_directory(fixtures)) throw Error(ErrorCode::InvalidArgument, "no fixture directory " + fixtures);
      for (auto s : ingest::kAllSources) req.sources.sources[s].fixture_dir = fixtures;
      req.sources.offline = true;
    }
    if (offline) req.sources.offline = true;
    if (const char* env = std::getenv(kCacheEnv); env != nullptr && *env != '\0') req.sources.cache_dir = env;
    if (!cache_dir.empty()) req.sources.cache_dir = cache_dir;
    if (!bbox.empty()) req.bbox = pipeline::parse_bbox(bbox);
    if (n) req.raster_n = *n;
    if (seed) req.seed = *seed;
    if (max_extent) req.max_extent = *max_extent;
    if (!out.empty()) req.output = out;
    return req;
  }
};

int report(const Error& e) {
  std::fprintf(stderr, "geoscene: error: %s\n", e.what());
  return dynamic_cast<const pipeline::StageError*>(&e) != nullptr ? kExitStage : kExitUsage;
}

int cmd_generate(const SourceFlags& flags, bool dry) {
  const auto req = flags.resolve();
  if (dry) {
    int failed = 0;
    for (const auto& c : pipeline::dry_run(req)) {
      std::printf("%-9s %s %s\n", c.stage.c_str(), c.ok ? (c.skipped ? "SKIP" : "OK  ") : "FAIL", c.message.c_str());
      failed += c.ok ? 0 : 1;
    }
    return failed == 0 ? 0 : kExitStage;
  }
  const auto result = pipeline::generate(req, nullptr, [](const pipeline::StageTiming& t) {
    std::fprintf(stderr, "stage %-9s %8.3f s\n", t.stage.c_str(), t.seconds);
  });
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  pipeline::write_outputs(result, req.output);
  std::printf("wrote %s (%zu objects, %zu bytes) and %s\n", req.output.string().c_str(), result.scene.objects.size(),
              result.glb.size(), pipeline::manifest_path(req.output).string().c_str());
  return 0;
}

int cmd_fetch(const SourceFlags& flags) {
  const auto req = flags.resolve();
  const auto r = pipeline::prefetch(req);
  for (const auto& [s, n] : r.accesses) std::printf("%-9s %zu fetched\n", ingest::to_string(s), n);
  std::printf("total %zu fetched, %zu cached\n", r.total_accesses, r.cache_hits);
  return 0;
}

struct ServeFlags {
  std::string network;
  std::string replay;
  int port = 7070;
  std::string bind = "127.0.0.1";
  double speed = 1.0;
  double tick = 0.1;
  std::optional<double> run_for;
};

int cmd_transit_serve(const ServeFlags& f) {
  auto net = std::make_shared<const transit::TransitNetwork>(transit::load_network(ingest::read_file(f.network)));
  auto fixes = transit::read_replay(ingest::read_file(f.replay));
  if (!(f.speed > 0) || !(f.tick > 0)) throw Error(ErrorCode::InvalidArgument, "speed and tick must be > 0");

  transit::Tracker tracker(net);
  transit::ReplayDriver driver(tracker, std::move(fixes));
  const double t0 = driver.start_time(), t_end = driver.end_time();
  driver.advance(t0);
  transit::Server server(tracker, f.port, f.bind);
  std::printf("listening on %s:%d\n", f.bind.c_str(), server.port());
  std::fflush(stdout);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto wall0 = std::chrono::steady_clock::now();
  bool ended = false;
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::duration<double>(f.tick));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    if (f.run_for && wall >= *f.run_for) break;
    // After the last fix the clock stops, so vehicles hold where extrapolation left them.
    driver.advance(std::min(t0 + wall * f.speed, t_end));
    if (!ended && driver.finished() && t0 + wall * f.speed >= t_end) {
      ended = true;
      std::fprintf(stderr, "replay finished at feed time %.3f\n", t_end);
    }
  }
  server.stop();
  const auto c = tracker.counters();
  std::fprintf(stderr, "served %zu requests; fixes applied %zu, stale %zu, too far %zu, unknown route %zu\n",
               server.requests_served(), c.applied, c.stale, c.too_far, c.unknown_route);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoscene: 3D scenes from open geodata"};
  app.require_subcommand(1);

  SourceFlags gen_flags;
  bool dry = false;
  auto* gen = app.add_subcommand("generate", "build a .glb scene and manifest for a bbox");
  gen_flags.add_to(*gen, true);
  gen->add_flag("--dry-run", dry, "only load and decode each stage's sources");

  SourceFlags fetch_flags;
  auto* fetch = app.add_subcommand("fetch", "prefill the cache for a bbox");
  fetch_flags.add_to(*fetch, false);

  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("transit-serve", "replay a vehicle feed and answer snapshot requests");
  serve->add_option("--network", serve_flags.network, "network document")->required();
  serve->add_option("--replay", serve_flags.replay, "replay file")->required();
  serve->add_option("--port", serve_flags.port, "TCP port, 0 picks a free one");
  serve->add_option("--bind", serve_flags.bind, "listen address");
  serve->add_option("--speed", serve_flags.speed, "feed seconds per wall second");
  serve->add_option("--tick", serve_flags.tick, "feed update interval in wall seconds");
  serve->add_option("--for", serve_flags.run_for, "stop after this many wall seconds");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_generate(gen_flags, dry);
    if (fetch->parsed()) return cmd_fetch(fetch_flags);
    return cmd_transit_serve(serve_flags);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "geoscene: error: %s\n", e.what());
    return kExitUsage;
  }
}
