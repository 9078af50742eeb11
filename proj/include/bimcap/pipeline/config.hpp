#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bimcap/depth.hpp"
#include "bimcap/drift.hpp"
#include "bimcap/floorplan.hpp"
#include "bimcap/geometry.hpp"
#include "bimcap/metrics.hpp"
#include "bimcap/optimize.hpp"
#include "bimcap/scene.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap::pipeline {

namespace fs = std::filesystem;

// Two rooms (4.9 x 8 m and 5 x 8 m) joined by a door, with one square column in each.
SceneSpec reference_scene_spec();

struct SceneSource {
  SceneSpec spec = reference_scene_spec();
  std::optional<fs::path> spec_path;  // JSON scene description, replaces `spec`
  std::optional<fs::path> obj_dir;    // per-entity OBJ directory, replaces both
};

struct SamplingConfig {
  double density = 4000.0;  // points per m^2
  std::uint64_t seed = 1;
};

struct CameraConfig {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 160.0;
  double cy = 120.0;
  int width = 320;
  int height = 240;
  // "forward": optical axis along the sensor's x axis; "identity": sensor frame is the optical frame.
  std::string mount = "forward";

  [[nodiscard]] CameraModel model() const;
};

struct TrajectoryConfig {
  std::vector<Vec2> waypoints = {Vec2(2.0, 2.0), Vec2(2.0, 4.0), Vec2(8.0, 4.0)};
  int frames = 120;
  double height = 1.2;
};

struct SimulatorConfig {
  int pattern_rows = 32;
  int pattern_cols = 64;
  CorrespondenceParams correspondences{50, 0.5, 3, 7, 8, 0.01};
};

struct DriftSettings {
  DriftConfig config{0.0, 0.0, 0.0, 11};
  // When both are set the sigmas are calibrated to hit these ATE values.
  std::optional<double> target_ate_pos;
  std::optional<double> target_ate_rot;
};

struct DepthConfig {
  InterpSpace interp_space = InterpSpace::depth;
  bool smooth = true;
  int smooth_radius = 5;
  BuildOptions lift{4, 0.05};
};

struct MetricsConfig {
  NeighborhoodParams neighborhood{0.30, 10};
  NndMode nnd_mode = NndMode::to_reference;
  int map_stride = 8;        // pixel stride when fusing frames into a map
  int reference_stride = 10;  // keep every n-th reference point
};

struct PipelineConfig {
  fs::path output_dir = "bimcap_out";
  unsigned threads = 0;
  SceneSource scene;
  SamplingConfig sampling;
  FloorplanParams floorplan;
  CameraConfig camera;
  TrajectoryConfig trajectory;
  SimulatorConfig simulator;
  DriftSettings drift;
  DepthConfig depth;
  TermConfig terms;
  SolveOptions solver;
  MetricsConfig metrics;
  std::vector<std::vector<Term>> ablation_rows = {
      {Term::geometric},
      {Term::floor},
      {Term::wall},
      {Term::geometric, Term::floor, Term::wall},
      {Term::geometric, Term::floor, Term::wall, Term::column, Term::ceiling},
  };

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig from_json(const nlohmann::json& j);

// Defaults, then the optional config file, then `key.path=value` overrides in order.
// Unknown keys and type mismatches raise config errors naming the key.
PipelineConfig load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides = {});

// Parses a term list such as "G,F,W" or "geometric+floor".
std::vector<Term> parse_term_list(const std::string& text);

}  // namespace bimcap::pipeline
