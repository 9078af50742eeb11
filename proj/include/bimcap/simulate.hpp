#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/scene.hpp"

namespace bimcap {

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

// World-from-sensor poses ordered by time.
struct Trajectory {
  std::vector<TimedPose> poses;

  // Throws invalid_argument unless there are >= 2 poses with strictly increasing stamps.
  void validate() const;
  [[nodiscard]] std::size_t size() const { return poses.size(); }
  [[nodiscard]] std::vector<Pose> pose_list() const;
};

struct DepthSample {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  SemanticClass cls = SemanticClass::other;
};

struct Frame {
  int id = 0;
  double timestamp = 0.0;
  std::vector<DepthSample> samples;
};

struct Correspondence {
  int frame_i = 0;
  int frame_j = 0;
  double u_i = 0.0;
  double v_i = 0.0;
  double u_j = 0.0;
  double v_j = 0.0;
};

struct RayHit {
  double depth = 0.0;  // ray parameter along an optical ray whose z component is 1
  SemanticClass cls = SemanticClass::other;
  Vec3 point = Vec3::Zero();
};

// Exact ray/triangle casting over a scene, accelerated by a median-split BVH.
class SceneRaycaster {
 public:
  explicit SceneRaycaster(const BuildingScene& scene);

  // Nearest hit with t > min_t along origin + t * direction.
  [[nodiscard]] std::optional<RayHit> cast(const Vec3& origin, const Vec3& direction, double min_t = 1e-9) const;

  // Casts the optical ray through pixel (u, v) of a camera mounted on a sensor at `pose`.
  [[nodiscard]] std::optional<RayHit> cast_pixel(const CameraModel& cam, const Pose& pose, double u, double v) const;

 private:
  struct Tri {
    Vec3 a;
    Vec3 e1;
    Vec3 e2;
    SemanticClass cls;
  };
  struct Node {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    std::uint32_t begin = 0;
    std::uint32_t count = 0;  // > 0 marks a leaf
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Tri> tris_;
  std::vector<Node> nodes_;
};

// Camera-frame pose for a sensor pose: world-from-sensor composed with sensor-from-camera.
Pose camera_pose(const CameraModel& cam, const Pose& sensor_pose);

Frame raycast_depth(const SceneRaycaster& caster, const CameraModel& cam, const Pose& pose,
                    const std::vector<Vec2>& pattern, int frame_id = 0, double timestamp = 0.0);

std::vector<Vec2> scanline_pattern(const CameraModel& cam, int rows, int cols);

struct CorrespondenceParams {
  int per_pair = 50;
  double pixel_noise_sigma = 0.5;
  int window = 3;
  std::uint64_t seed = 0;
  // Candidate rays tried per requested correspondence before giving up on a pair.
  int attempts_per_match = 8;
  double occlusion_tolerance = 0.01;
};

std::vector<Correspondence> synth_correspondences(const SceneRaycaster& caster, const CameraModel& cam,
                                                  const Trajectory& traj, const CorrespondenceParams& params);

Trajectory generate_gt_trajectory(const BuildingScene& scene, const std::vector<Vec2>& waypoints, int n_frames,
                                  double height);

}  // namespace bimcap
