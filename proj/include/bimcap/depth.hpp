#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/scene.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap {

inline constexpr std::uint8_t kUnlabeled = 255;

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;        // NaN where invalid
  std::vector<std::uint8_t> label;  // SemanticClass value or kUnlabeled

  DepthMap() = default;
  DepthMap(int w, int h);

  [[nodiscard]] std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  [[nodiscard]] bool valid(int u, int v) const;
  [[nodiscard]] double at(int u, int v) const { return depth[index(u, v)]; }
  [[nodiscard]] std::optional<SemanticClass> class_at(int u, int v) const;
  [[nodiscard]] std::size_t valid_count() const;

  // Bilinear depth at a fractional pixel when all four neighbors are valid, otherwise the
  // rounded pixel's depth when valid.
  [[nodiscard]] std::optional<double> sample(double u, double v) const;
};

enum class InterpSpace { depth, inverse_depth };

// Delaunay triangulation of the sample pixels and barycentric interpolation inside the
// convex hull; per-pixel class from the nearest sample.
DepthMap densify_linear(const Frame& frame, const CameraModel& cam, InterpSpace space = InterpSpace::depth);

// Writes samples into their (rounded) pixels without interpolation.
DepthMap splat_samples(const Frame& frame, const CameraModel& cam);

// Exact per-pixel depth and class by raycasting every pixel center.
DepthMap render_dense_depth(const SceneRaycaster& caster, const CameraModel& cam, const Pose& pose);

// Triangles (as sample index triples) of the Delaunay triangulation of `pixels`.
std::vector<std::array<std::size_t, 3>> delaunay_triangles(const std::vector<Vec2>& pixels);

// Assigns nearest-sample classes to every valid pixel of `dm`.
void assign_nearest_classes(DepthMap& dm, const Frame& frame);

DepthMap smooth_planar_regions(const DepthMap& dm, ClassSet classes = {SemanticClass::floor, SemanticClass::ceiling},
                               int radius = 5);

// World-frame points for every stride-th valid pixel with a class in `classes`.
SemanticPointCloud lift_labeled_points(const DepthMap& dm, const CameraModel& cam, const Pose& pose, ClassSet classes,
                                       int stride = 4);

}  // namespace bimcap
