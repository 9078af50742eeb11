#include "bimcap/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "bimcap/error.hpp"

namespace bimcap {

Pose::Pose(const Eigen::Quaterniond& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}

Pose Pose::from_translation(const Vec3& t) { return {Eigen::Quaterniond::Identity(), t}; }

Pose Pose::from_yaw_pitch_roll(double yaw_deg, double pitch_deg, double roll_deg, const Vec3& t) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(deg2rad(yaw_deg), Vec3::UnitZ()) *
                               Eigen::AngleAxisd(deg2rad(pitch_deg), Vec3::UnitY()) *
                               Eigen::AngleAxisd(deg2rad(roll_deg), Vec3::UnitX());
  return {q, t};
}

Pose compose(const Pose& a, const Pose& b) {
  return {(a.rotation * b.rotation).normalized(), a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Eigen::Quaterniond q_inv = p.rotation.conjugate();
  return {q_inv, -(q_inv * p.translation)};
}

Vec3 apply(const Pose& p, const Vec3& x) { return p.rotation * x + p.translation; }

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<  0.0,  -v.z(),  v.y(),
        v.z(),  0.0,  -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

Eigen::Quaterniond so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  double w = 0.0;
  double k = 0.0;  // sin(theta/2) / theta
  if (theta < 1e-8) {
    const double t2 = theta * theta;
    w = 1.0 - t2 / 8.0;
    k = 0.5 - t2 / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    k = std::sin(0.5 * theta) / theta;
  }
  return Eigen::Quaterniond(w, k * omega.x(), k * omega.y(), k * omega.z()).normalized();
}

Vec3 so3_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v / q.w();
  const double angle = 2.0 * std::atan2(n, q.w());
  return angle / n * v;
}

Pose retract(const Pose& p, const Vec6& delta) {
  const Eigen::Quaterniond dq = so3_exp(delta.head<3>());
  return {(dq * p.rotation).normalized(), p.translation + delta.tail<3>()};
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::invalid_argument, "camera image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::invalid_argument, "camera principal point outside the image");
  }
}

Pose body_to_optical() {
  Mat3 r;
  // clang-format off
  r << 0.0, -1.0,  0.0,
       0.0,  0.0, -1.0,
       1.0,  0.0,  0.0;
  // clang-format on
  return {Eigen::Quaterniond(r), Vec3::Zero()};
}

std::optional<Vec2> project(const CameraModel& cam, const Vec3& x_cam) {
  if (!(x_cam.z() > 0.0)) return std::nullopt;
  const double u = cam.fx * x_cam.x() / x_cam.z() + cam.cx;
  const double v = cam.fy * x_cam.y() / x_cam.z() + cam.cy;
  if (!cam.in_bounds(u, v)) return std::nullopt;
  return Vec2(u, v);
}

Vec3 backproject(const CameraModel& cam, double u, double v, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw Error(ErrorCode::invalid_argument, "backproject requires a positive finite depth");
  }
  return {(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth};
}

double point_to_plane(const Vec3& x, const Plane& plane) { return plane.normal.dot(x) - plane.offset; }

SegmentDistance point_to_segment(const Vec2& x, const Segment2D& s) {
  const Vec2 d = s.end - s.start;
  const double len2 = d.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((x - s.start).dot(d) / len2, 0.0, 1.0);
  const Vec2 closest = s.start + t * d;
  return {(x - closest).norm(), closest};
}

double rotation_angle_deg(const Eigen::Quaterniond& q) {
  const double n = q.vec().norm();
  return rad2deg(2.0 * std::atan2(n, std::abs(q.w())));
}

double rotation_geodesic(const Pose& a, const Pose& b) {
  return rotation_angle_deg(a.rotation.conjugate() * b.rotation);
}

YawPitchRoll to_yaw_pitch_roll(const Eigen::Quaterniond& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  YawPitchRoll out;
  const double s = std::clamp(-r(2, 0), -1.0, 1.0);
  out.pitch = rad2deg(std::asin(s));
  if (std::abs(std::abs(out.pitch) - 90.0) < 1e-6) {
    out.gimbal_degenerate = true;
    out.roll = 0.0;
    out.yaw = rad2deg(std::atan2(-r(0, 1), r(1, 1)));
    return out;
  }
  out.yaw = rad2deg(std::atan2(r(1, 0), r(0, 0)));
  out.roll = rad2deg(std::atan2(r(2, 1), r(2, 2)));
  return out;
}

YawPitchRoll to_yaw_pitch_roll(const Pose& p) { return to_yaw_pitch_roll(p.rotation); }

}  // namespace bimcap
