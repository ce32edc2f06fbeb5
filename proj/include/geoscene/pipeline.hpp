#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoscene/error.hpp"
#include "geoscene/features.hpp"
#include "geoscene/hydro.hpp"
#include "geoscene/ingest.hpp"
#include "geoscene/landcover.hpp"
#include "geoscene/scene.hpp"
#include "geoscene/terrain.hpp"
#include "geoscene/vegetation.hpp"

namespace geoscene::pipeline {

inline constexpr double kDefaultMaxExtent = 5000.0;  ///< metres per bbox side

/// Fully resolved generation run. Every field ends up in the manifest.
struct GenerationRequest {
  GeoBox bbox;
  ingest::SourceConfig sources;
  landcover::ClassTable classes = landcover::ClassTable::defaults();
  int raster_n = 256;
  terrain::LodParams lod;
  /// Viewpoint relative to the centre of the scene bounds (z above datum).
  geom::Point3D viewpoint_offset = geom::Point3D(0.0, 0.0, 300.0);
  double fill_radius = 50.0;
  int fill_min_samples = 4;
  hydro::WaterParams water;
  vegetation::CrownParams crowns;
  std::uint64_t seed = 1;
  double max_extent = kDefaultMaxExtent;
  std::filesystem::path transit_network;  ///< optional; exported as vehicle tracks
  std::filesystem::path output = "scene.glb";

  /// Throws InvalidArgument: empty bbox, extent above max_extent, n < 1,
  /// bad source config.
  void validate() const;
  geom::GeoPoint scene_origin() const { return bbox.min_corner(); }
};

/// Reads a JSON config. Relative paths (fixtures, class table, transit
/// network) resolve against the config file's directory.
GenerationRequest load_config(const std::filesystem::path& path);
/// Same, from a parsed document and a base directory.
GenerationRequest request_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// "min_lat,min_lon,max_lat,max_lon"; throws InvalidArgument.
GeoBox parse_bbox(const std::string& text);

/// An Error raised inside a stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr const char* kStages[] = {"landcover", "elevation", "water", "buildings",
                                          "trees",     "assemble",  "export"};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct GenerationResult {
  scene::SceneGraph scene;
  std::string glb;
  std::string manifest;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
  std::size_t source_accesses = 0;
};

/// Runs land cover -> elevation -> water -> buildings -> trees -> assemble ->
/// export. Throws StageError on the first fatal error. `on_stage` sees each
/// finished stage.
GenerationResult generate(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport = nullptr,
                          const std::function<void(const StageTiming&)>& on_stage = {});

/// `<output>` and `<output stem>.manifest.json` next to it.
std::filesystem::path manifest_path(const std::filesystem::path& glb_path);
void write_outputs(const GenerationResult& result, const std::filesystem::path& glb_path);

struct StageCheck {
  std::string stage;
  bool ok = false;
  bool skipped = false;  ///< nothing of its own to check (inputs unavailable)
  std::string message;
  std::optional<ErrorCode> code;
};

/// Loads and decodes each stage's own source data without generating
/// anything. A broken source fails only the stage that owns it.
std::vector<StageCheck> dry_run(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport = nullptr);

struct FetchReport {
  std::map<ingest::Source, std::size_t> accesses;
  std::size_t total_accesses = 0;
  std::size_t cache_hits = 0;
};

/// Pulls every file a generation of `req.bbox` reads into the cache.
/// Throws InvalidArgument without a cache directory, StageError on failure.
FetchReport prefetch(const GenerationRequest& req, std::shared_ptr<ingest::Transport> transport = nullptr);

}  // namespace geoscene::pipeline
