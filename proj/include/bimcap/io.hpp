#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bimcap/depth.hpp"
#include "bimcap/floorplan.hpp"
#include "bimcap/metrics.hpp"
#include "bimcap/optimize.hpp"
#include "bimcap/scene.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap::io {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
// Writes atomically enough for the pipeline: parent directories are created first.
void write_text(const fs::path& path, const std::string& text);

// TUM: `timestamp tx ty tz qx qy qz qw`, '#' comments and blank lines ignored.
Trajectory parse_tum(const std::string& text, const std::string& source = "<memory>");
std::string format_tum(const Trajectory& traj);
Trajectory read_tum(const fs::path& path);
void write_tum(const fs::path& path, const Trajectory& traj);

// ASCII PLY with float x, y, z and uchar class.
SemanticPointCloud parse_ply(const std::string& text, const std::string& source = "<memory>");
std::string format_ply(const SemanticPointCloud& cloud);
SemanticPointCloud read_ply(const fs::path& path);
void write_ply(const fs::path& path, const SemanticPointCloud& cloud);

// Frame CSV with header `u,v,depth,class`; the class column holds a class name.
std::vector<DepthSample> parse_frame_csv(const std::string& text, const std::string& source = "<memory>");
std::string format_frame_csv(const Frame& frame);

// A frame directory holds `frame_<id>.csv` files and `manifest.json` ({"<id>": timestamp}).
void write_frames(const fs::path& dir, const std::vector<Frame>& frames);
std::vector<Frame> read_frames(const fs::path& dir);

// Correspondence CSV with header `frame_i,u_i,v_i,frame_j,u_j,v_j`.
std::vector<Correspondence> parse_correspondences(const std::string& text, const std::string& source = "<memory>");
std::string format_correspondences(const std::vector<Correspondence>& corr);
std::vector<Correspondence> read_correspondences(const fs::path& path);
void write_correspondences(const fs::path& path, const std::vector<Correspondence>& corr);

// Dense depth: uint32 LE width, uint32 LE height, then width*height float32 LE, NaN = invalid.
// Labels are not part of the format; readers recover them from the frame's samples.
std::string encode_depth(const DepthMap& dm);
DepthMap decode_depth(const std::string& bytes, const std::string& source = "<memory>");
void write_depth(const fs::path& path, const DepthMap& dm);
DepthMap read_depth(const fs::path& path);

// {segments:[{class,x1,y1,x2,y2}], floor_z, ceiling_z}, six decimals.
std::string format_plan(const VectorFloorPlan& plan);
VectorFloorPlan parse_plan(const std::string& text, const std::string& source = "<memory>");
void write_plan(const fs::path& path, const VectorFloorPlan& plan);
VectorFloorPlan read_plan(const fs::path& path);

// ASCII PGM (P2), 0 = free, 255 = occupied; the first row is the raster's largest y.
std::string format_pgm(const OccupancyRaster& raster);

SceneSpec parse_scene_spec(const std::string& text, const std::string& source = "<memory>");
std::string format_scene_spec(const SceneSpec& spec);
SceneSpec read_scene_spec(const fs::path& path);

std::string format_solve_report(const SolveReport& report);
SolveReport parse_solve_report(const std::string& text, const std::string& source = "<memory>");

std::string format_metrics_json(const MetricsReport& report);
std::string metrics_csv_header();
std::string format_metrics_csv_row(const MetricsReport& report);

}  // namespace bimcap::io
