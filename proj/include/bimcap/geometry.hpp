#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

#include "bimcap/semantic.hpp"

namespace bimcap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Rigid transform x -> R x + t. Poses in trajectories are world-from-sensor.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Vec3& t);

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t);
  // Intrinsic Z-Y-X angles in degrees: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Pose from_yaw_pitch_roll(double yaw_deg, double pitch_deg, double roll_deg,
                                  const Vec3& t = Vec3::Zero());

  [[nodiscard]] Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
Vec3 apply(const Pose& p, const Vec3& x);

Mat3 skew(const Vec3& v);
Eigen::Quaterniond so3_exp(const Vec3& omega);
Vec3 so3_log(const Eigen::Quaterniond& q);

// Left-multiplied increment used by the optimizer:
// R <- Exp(delta[0:3]) * R, t <- t + delta[3:6].
Pose retract(const Pose& p, const Vec6& delta);

// Undistorted pinhole camera. `extrinsic` maps sensor-frame points into the optical frame.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Pose extrinsic = Pose::identity();

  // Throws invalid_argument when intrinsics violate fx, fy > 0 and the principal point bounds.
  void validate() const;
  [[nodiscard]] bool in_bounds(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < width && v < height;
  }
};

// Camera-from-body rotation for a body frame with x forward, y left, z up and the
// usual optical frame (z forward, x right, y down).
Pose body_to_optical();

std::optional<Vec2> project(const CameraModel& cam, const Vec3& x_cam);
Vec3 backproject(const CameraModel& cam, double u, double v, double depth);

struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  static Plane horizontal(double z) { return {Vec3::UnitZ(), z}; }
};

double point_to_plane(const Vec3& x, const Plane& plane);

struct Segment2D {
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  SemanticClass cls = SemanticClass::wall;

  [[nodiscard]] double length() const { return (end - start).norm(); }
};

struct SegmentDistance {
  double distance = 0.0;
  Vec2 closest = Vec2::Zero();
};

SegmentDistance point_to_segment(const Vec2& x, const Segment2D& s);

// Angle of the relative rotation between a and b, in degrees within [0, 180].
double rotation_geodesic(const Pose& a, const Pose& b);
double rotation_angle_deg(const Eigen::Quaterniond& q);

struct YawPitchRoll {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  bool gimbal_degenerate = false;
};

YawPitchRoll to_yaw_pitch_roll(const Pose& p);
YawPitchRoll to_yaw_pitch_roll(const Eigen::Quaterniond& q);

}  // namespace bimcap
