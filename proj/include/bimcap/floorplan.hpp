#pragma once

#include <cstdint>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/scene.hpp"

namespace bimcap {

struct VectorFloorPlan {
  std::vector<Segment2D> segments;
  Plane floor = Plane::horizontal(0.0);
  Plane ceiling = Plane::horizontal(2.5);

  [[nodiscard]] std::vector<Segment2D> segments_of(SemanticClass cls) const;
};

// Row-major occupancy grid; cell (ix, iy) covers
// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
struct OccupancyRaster {
  double resolution = 0.02;
  Vec2 origin = Vec2::Zero();
  int cols = 0;
  int rows = 0;
  std::vector<std::uint8_t> cells;
  SemanticClass cls = SemanticClass::wall;

  [[nodiscard]] bool occupied(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < cols && iy < rows && cells[static_cast<std::size_t>(iy) * cols + ix] != 0;
  }
  [[nodiscard]] Vec2 cell_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * resolution, (iy + 0.5) * resolution);
  }
  [[nodiscard]] std::size_t occupied_count() const;
};

struct FloorplanParams {
  double half_band = 0.20;
  double resolution = 0.02;
  int min_hits = 2;
  double min_segment_length = 0.05;
  // Douglas-Peucker tolerance and merge gap, in cells.
  double simplify_tolerance_cells = 2.0;
  double merge_angle_deg = 2.0;
  double merge_gap_cells = 3.0;
  // Morphological closing radius (cells) applied before contour tracing; 0 disables.
  int closing_radius = 1;
  // Enclosed free regions smaller than this (m^2) are filled before tracing.
  double min_hole_area = 0.02;
};

std::vector<Vec2> slab_filter(const SemanticPointCloud& cloud, double floor_z, double half_band,
                              SemanticClass cls);

OccupancyRaster rasterize(const std::vector<Vec2>& points, double resolution, int min_hits = 2,
                          SemanticClass cls = SemanticClass::wall);

std::vector<Segment2D> vectorize(const OccupancyRaster& raster, const FloorplanParams& params = {});

// Closed cell-center contours of the raster after closing: outer borders, and the occupied
// cells bordering each hole.
std::vector<std::vector<Vec2>> trace_contours(const OccupancyRaster& raster, int closing_radius = 1,
                                              double min_hole_area = 0.0);

std::vector<Vec2> douglas_peucker(const std::vector<Vec2>& polyline, double epsilon);

struct FloorplanResult {
  VectorFloorPlan plan;
  OccupancyRaster wall_raster;
  OccupancyRaster column_raster;
};

FloorplanResult build_floorplan_with_rasters(const SemanticPointCloud& cloud, double floor_z, double ceiling_z,
                                             const FloorplanParams& params = {});

// Plan read directly off the mesh geometry: every vertical wall or column triangle
// projects to one footprint segment. Used as a noise-free reference.
VectorFloorPlan exact_footprint_plan(const BuildingScene& scene);

VectorFloorPlan build_floorplan(const SemanticPointCloud& cloud, double floor_z, double ceiling_z,
                                const FloorplanParams& params = {});

}  // namespace bimcap
