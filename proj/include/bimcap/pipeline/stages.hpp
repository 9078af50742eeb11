#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bimcap/pipeline/config.hpp"

namespace bimcap::pipeline {

// Standard file locations under the output directory.
struct Layout {
  fs::path root;
  fs::path scene_dir;  // normalized per-entity OBJ export
  fs::path scene_summary;
  fs::path reference_ply;
  fs::path plan_json;
  fs::path frames_dir;
  fs::path correspondences_csv;
  fs::path gt_tum;
  fs::path drifted_tum;
  fs::path depth_dir;
  fs::path refined_tum;
  fs::path solve_report;
  fs::path map_initial_ply;
  fs::path map_refined_ply;
  fs::path metrics_json;
  fs::path metrics_csv;
  fs::path ablation_csv;
  fs::path plot_svg;

  explicit Layout(const fs::path& out);
  [[nodiscard]] fs::path raster_pgm(SemanticClass cls) const;
  [[nodiscard]] fs::path depth_file(int frame_id) const;
};

// In-memory building blocks shared by the stages and the test harnesses.
BuildingScene load_scene_source(const SceneSource& source);
std::vector<Frame> render_frames(const SceneRaycaster& caster, const CameraModel& cam, const Trajectory& traj,
                                 int pattern_rows, int pattern_cols);
DepthMap densify_frame(const Frame& frame, const CameraModel& cam, const DepthConfig& cfg);
std::vector<DepthMap> densify_frames(const std::vector<Frame>& frames, const CameraModel& cam, const DepthConfig& cfg);
// Pose of each frame from the trajectory by timestamp (nearest within 0.05 s).
std::vector<Pose> poses_for_frames(const std::vector<Frame>& frames, const Trajectory& traj);
Trajectory trajectory_for_frames(const std::vector<Frame>& frames, const std::vector<Pose>& poses);
SemanticPointCloud fuse_map(const std::vector<DepthMap>& depth, const CameraModel& cam, const std::vector<Pose>& poses,
                            int stride);
SemanticPointCloud thin_cloud(const SemanticPointCloud& cloud, int stride);
MetricsReport evaluate_metrics(const Trajectory& est, const Trajectory& gt, const SemanticPointCloud& map,
                               const SemanticPointCloud& reference, const MetricsConfig& cfg);
DriftConfig resolve_drift(const Trajectory& gt, const DriftSettings& settings);

struct AblationRow {
  std::vector<Term> terms;
  MetricsReport metrics;
  SolveReport report;
};

std::string ablation_csv_header();
std::string format_ablation_row(const AblationRow& row);

// SVG line charts of ATE_pos and ATE_rot (cost when ATE is absent) against iteration.
std::string render_plot_svg(const std::vector<SolveReport>& reports, const std::vector<std::string>& labels);

// File-based stages. Each reads its inputs from the layout (or the given overrides) and
// writes its outputs; rerunning with identical inputs reproduces identical files.
std::string stage_scene(const PipelineConfig& cfg);
void stage_sample(const PipelineConfig& cfg);
void stage_floorplan(const PipelineConfig& cfg, const std::optional<fs::path>& ply = std::nullopt,
                     const std::optional<fs::path>& out = std::nullopt);
void stage_simulate(const PipelineConfig& cfg);
DriftConfig stage_drift(const PipelineConfig& cfg, const std::optional<fs::path>& in = std::nullopt,
                        const std::optional<fs::path>& out = std::nullopt);
void stage_densify(const PipelineConfig& cfg);
void stage_fuse(const PipelineConfig& cfg, const fs::path& trajectory, const fs::path& out);
SolveReport stage_optimize(const PipelineConfig& cfg, const std::optional<fs::path>& initial = std::nullopt,
                           const std::optional<fs::path>& out = std::nullopt);
MetricsReport stage_eval(const PipelineConfig& cfg, const std::optional<fs::path>& est = std::nullopt,
                         const std::optional<fs::path>& gt = std::nullopt,
                         const std::optional<fs::path>& map = std::nullopt,
                         const std::optional<fs::path>& reference = std::nullopt);
std::vector<AblationRow> stage_ablate(const PipelineConfig& cfg, const std::optional<fs::path>& out = std::nullopt);
void stage_plot(const std::vector<fs::path>& reports, const std::vector<std::string>& labels, const fs::path& out);

// scene, sample, floorplan, simulate, drift, densify, fuse (initial), optimize, fuse (refined),
// eval and plot, in that order.
void run_all(const PipelineConfig& cfg, bool with_ablation = false);

}  // namespace bimcap::pipeline
