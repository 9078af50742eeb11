#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/scene.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap::test {

// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

  Vec3 vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Vec2 vec2(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }

  Eigen::Quaterniond rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    return q.normalized();
  }

  Pose pose(double extent = 5.0) { return {rotation(), vec3(-extent, extent)}; }

  // Small perturbation around identity: angles in degrees, offsets in meters.
  Pose small_pose(double max_deg, double max_m) {
    const Vec3 axis = vec3(-1.0, 1.0).normalized();
    const double ang = deg2rad(uniform(-max_deg, max_deg));
    return {Eigen::Quaterniond(Eigen::AngleAxisd(ang, axis)), vec3(-max_m, max_m)};
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline double translation_gap(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

inline bool pose_near(const Pose& a, const Pose& b, double tol) {
  return translation_gap(a, b) < tol && deg2rad(rotation_geodesic(a, b)) < tol;
}

// Per-test scratch directory under the system temp dir, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bimcap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline SceneSpec single_room_spec(double w = 4.0, double h = 3.0) {
  SceneSpec spec;
  spec.rooms.push_back({0.0, 0.0, w, h});
  spec.wall_thickness = 0.1;
  spec.floor_z = 0.0;
  spec.ceiling_z = 2.5;
  return spec;
}

inline CameraModel small_camera() {
  CameraModel cam;
  cam.fx = 100.0;
  cam.fy = 100.0;
  cam.cx = 50.0;
  cam.cy = 50.0;
  cam.width = 100;
  cam.height = 100;
  return cam;
}

// Camera looking along the sensor x axis (x forward, y left, z up).
inline CameraModel forward_camera(int w = 160, int h = 120, double f = 100.0) {
  CameraModel cam;
  cam.fx = f;
  cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  cam.extrinsic = body_to_optical();
  return cam;
}

inline std::vector<Segment2D> rectangle(double x0, double y0, double x1, double y1,
                                        SemanticClass cls = SemanticClass::wall) {
  return {{Vec2(x0, y0), Vec2(x1, y0), cls},
          {Vec2(x1, y0), Vec2(x1, y1), cls},
          {Vec2(x1, y1), Vec2(x0, y1), cls},
          {Vec2(x0, y1), Vec2(x0, y0), cls}};
}

inline double distance_to_set(const Vec2& x, const std::vector<Segment2D>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : set) best = std::min(best, point_to_segment(x, s).distance);
  return best;
}

// Largest distance from points densely spaced along `from` to the segments of `to`.
inline double directed_hausdorff(const std::vector<Segment2D>& from, const std::vector<Segment2D>& to,
                                 double step = 0.002) {
  double worst = 0.0;
  for (const auto& s : from) {
    const int n = std::max(1, static_cast<int>(std::ceil(s.length() / step)));
    for (int k = 0; k <= n; ++k) {
      const Vec2 p = s.start + (s.end - s.start) * (static_cast<double>(k) / n);
      worst = std::max(worst, distance_to_set(p, to));
    }
  }
  return worst;
}

inline double hausdorff(const std::vector<Segment2D>& a, const std::vector<Segment2D>& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

// Central differences of a residual under left increments of the pose.
template <class F>
Eigen::MatrixXd central_difference(const Pose& p, F residual, int rows, double h = 1e-6) {
  Eigen::MatrixXd j(rows, 6);
  for (int k = 0; k < 6; ++k) {
    Vec6 d = Vec6::Zero();
    d[k] = h;
    j.col(k) = (residual(retract(p, d)) - residual(retract(p, -d))) / (2.0 * h);
  }
  return j;
}

inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace bimcap::test
