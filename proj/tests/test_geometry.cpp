#include <doctest.h>

#include <cmath>

#include "bimcap/error.hpp"
#include "bimcap/geometry.hpp"
#include "support.hpp"

using namespace bimcap;
using bimcap::test::Gen;

namespace {

Mat3 rz(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitZ()).toRotationMatrix(); }
Mat3 ry(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitY()).toRotationMatrix(); }
Mat3 rx(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitX()).toRotationMatrix(); }

double matrix_log_angle(const Mat3& r) { return Eigen::AngleAxisd(r).angle(); }

}  // namespace

TEST_CASE("compose examples") {
  Gen g(1);
  const Pose p = g.pose();
  CHECK(test::pose_near(compose(Pose::identity(), p), p, 1e-12));
  CHECK(test::pose_near(compose(p, inverse(p)), Pose::identity(), 1e-9));
  const Pose y90 = Pose::from_yaw_pitch_roll(90, 0, 0);
  CHECK(rotation_geodesic(compose(y90, y90), Pose::from_yaw_pitch_roll(180, 0, 0)) < 1e-9);
}

TEST_CASE("apply examples") {
  CHECK((apply(Pose::identity(), Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK((apply(Pose::from_translation(Vec3(0, 0, 1)), Vec3::Zero()) - Vec3(0, 0, 1)).norm() == 0.0);
  CHECK((apply(Pose::from_yaw_pitch_roll(90, 0, 0), Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("compose is associative and inverse is two-sided on random poses") {
  Gen g(2);
  for (int k = 0; k < 1000; ++k) {
    const Pose a = g.pose();
    const Pose b = g.pose();
    const Pose c = g.pose();
    CHECK(test::pose_near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9));
    CHECK(test::pose_near(compose(a, inverse(a)), Pose::identity(), 1e-9));
    CHECK(test::pose_near(compose(inverse(a), a), Pose::identity(), 1e-9));
    CHECK(std::abs(compose(a, b).rotation.norm() - 1.0) < 1e-9);
    const Vec3 x = g.vec3(-3, 3);
    CHECK((apply(compose(a, b), x) - apply(a, apply(b, x))).norm() < 1e-9);
  }
}

TEST_CASE("project examples") {
  const CameraModel cam = test::small_camera();
  auto px = project(cam, Vec3(0, 0, 1));
  REQUIRE(px);
  CHECK((*px - Vec2(50, 50)).norm() == 0.0);
  CHECK_FALSE(project(cam, Vec3(0, 0, -1)));
  px = project(cam, Vec3(0.4, 0, 1));
  REQUIRE(px);
  CHECK((*px - Vec2(90, 50)).norm() < 1e-12);
  // u = 100 sits on the open image edge.
  CHECK_FALSE(project(cam, Vec3(0.5, 0, 1)));
}

TEST_CASE("backproject examples") {
  const CameraModel cam = test::small_camera();
  CHECK((backproject(cam, 50, 50, 2.0) - Vec3(0, 0, 2)).norm() == 0.0);
  CHECK((backproject(cam, 100, 50, 1.0) - Vec3(0.5, 0, 1)).norm() < 1e-12);
  CHECK_THROWS_AS(backproject(cam, 10, 10, 0.0), Error);
  CHECK_THROWS_AS(backproject(cam, 10, 10, -1.0), Error);
}

TEST_CASE("project/backproject round trip") {
  const CameraModel cam = test::small_camera();
  Gen g(3);
  int checked = 0;
  while (checked < 1000) {
    const Vec3 x(g.uniform(-2, 2), g.uniform(-2, 2), g.uniform(0.1, 10));
    const auto px = project(cam, x);
    if (!px) continue;
    const Vec3 back = backproject(cam, px->x(), px->y(), x.z());
    CHECK((back - x).norm() < 1e-9);
    const auto again = project(cam, back);
    REQUIRE(again);
    CHECK((*again - *px).norm() < 1e-9);
    ++checked;
  }
}

TEST_CASE("camera validation") {
  CameraModel cam = test::small_camera();
  CHECK_NOTHROW(cam.validate());
  cam.fx = 0;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = test::small_camera();
  cam.cx = 100;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = test::small_camera();
  cam.cy = -1;
  CHECK_THROWS_AS(cam.validate(), Error);
}

TEST_CASE("point_to_plane examples") {
  const Plane z0 = Plane::horizontal(0.0);
  CHECK(point_to_plane(Vec3(0, 0, 1), z0) == 1.0);
  CHECK(point_to_plane(Vec3(5, -3, 0), z0) == 0.0);
  CHECK(point_to_plane(Vec3(3, 4, -2), z0) == -2.0);
  CHECK(point_to_plane(Vec3(0, 0, 3), Plane::horizontal(2.5)) == doctest::Approx(0.5));
}

TEST_CASE("point_to_segment examples") {
  Segment2D s{Vec2(0, 0), Vec2(2, 0), SemanticClass::wall};
  auto d = point_to_segment(Vec2(1, 1), s);
  CHECK(d.distance == doctest::Approx(1.0));
  CHECK((d.closest - Vec2(1, 0)).norm() < 1e-12);
  d = point_to_segment(Vec2(3, 0), s);
  CHECK(d.distance == doctest::Approx(1.0));
  CHECK((d.closest - Vec2(2, 0)).norm() < 1e-12);
  Segment2D v{Vec2(0, 0), Vec2(0, 2), SemanticClass::wall};
  d = point_to_segment(Vec2(-1, -1), v);
  CHECK(d.distance == doctest::Approx(std::sqrt(2.0)));
  CHECK((d.closest - Vec2(0, 0)).norm() < 1e-12);
}

TEST_CASE("point_to_segment lies between line distance and endpoint distances") {
  Gen g(4);
  for (int k = 0; k < 2000; ++k) {
    Segment2D s{g.vec2(-5, 5), g.vec2(-5, 5), SemanticClass::wall};
    if (s.length() < 1e-3) continue;
    const Vec2 x = g.vec2(-8, 8);
    const double d = point_to_segment(x, s).distance;
    const Vec2 dir = (s.end - s.start).normalized();
    const Vec2 rel = x - s.start;
    const double line = std::abs(dir.x() * rel.y() - dir.y() * rel.x());
    CHECK(d <= (x - s.start).norm() + 1e-12);
    CHECK(d <= (x - s.end).norm() + 1e-12);
    CHECK(d >= line - 1e-12);
  }
}

TEST_CASE("rotation_geodesic examples and properties") {
  Gen g(5);
  const Pose p = g.pose();
  CHECK(rotation_geodesic(p, p) < 1e-6);
  CHECK(rotation_geodesic(Pose::from_yaw_pitch_roll(10, 0, 0), Pose::identity()) == doctest::Approx(10.0));
  CHECK(rotation_geodesic(Pose::from_yaw_pitch_roll(180, 0, 0), Pose::identity()) == doctest::Approx(180.0));
  for (int k = 0; k < 1000; ++k) {
    const Pose a = g.pose();
    const Pose b = g.pose();
    const Pose c = g.pose();
    const double ab = rotation_geodesic(a, b);
    CHECK(std::abs(ab - rotation_geodesic(b, a)) < 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0);
    CHECK(rotation_geodesic(a, c) <= ab + rotation_geodesic(b, c) + 1e-9);
    const double oracle = rad2deg(matrix_log_angle(a.rotation_matrix().transpose() * b.rotation_matrix()));
    CHECK(std::abs(ab - oracle) < 1e-6);
  }
}

TEST_CASE("yaw pitch roll examples") {
  auto e = to_yaw_pitch_roll(Pose::identity());
  CHECK(e.yaw == 0.0);
  CHECK(e.pitch == 0.0);
  CHECK(e.roll == 0.0);
  e = to_yaw_pitch_roll(Pose::from_yaw_pitch_roll(30, 0, 0));
  CHECK(e.yaw == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(std::abs(e.pitch) < 1e-12);
  CHECK(std::abs(e.roll) < 1e-12);

  // Yaw 10 then pitch 5, composed as matrices and checked against an axis-angle oracle.
  const Mat3 r = rz(10) * ry(5);
  e = to_yaw_pitch_roll(Eigen::Quaterniond(r));
  CHECK(std::abs(e.yaw - 10.0) < 1e-9);
  CHECK(std::abs(e.pitch - 5.0) < 1e-9);
  CHECK(std::abs(e.roll) < 1e-9);
  CHECK(matrix_log_angle((rz(e.yaw) * ry(e.pitch) * rx(e.roll)).transpose() * r) < 1e-9);
}

TEST_CASE("yaw pitch roll round trip away from gimbal lock") {
  Gen g(6);
  for (int k = 0; k < 1000; ++k) {
    const double yaw = g.uniform(-179, 179);
    const double pitch = g.uniform(-89, 89);
    const double roll = g.uniform(-179, 179);
    const Mat3 r = rz(yaw) * ry(pitch) * rx(roll);
    const auto e = to_yaw_pitch_roll(Eigen::Quaterniond(r));
    CHECK_FALSE(e.gimbal_degenerate);
    CHECK(matrix_log_angle((rz(e.yaw) * ry(e.pitch) * rx(e.roll)).transpose() * r) < 1e-9);
    CHECK(std::abs(e.yaw - yaw) < 1e-6);
    CHECK(std::abs(e.pitch - pitch) < 1e-6);
    CHECK(std::abs(e.roll - roll) < 1e-6);
    const Pose p = Pose::from_yaw_pitch_roll(yaw, pitch, roll);
    CHECK(matrix_log_angle(p.rotation_matrix().transpose() * r) < 1e-9);
  }
}

TEST_CASE("gimbal lock is flagged with zero roll") {
  const auto e = to_yaw_pitch_roll(Eigen::Quaterniond(rz(20) * ry(90) * rx(15)));
  CHECK(e.gimbal_degenerate);
  CHECK(e.roll == 0.0);
  CHECK(std::abs(e.pitch - 90.0) < 1e-6);
  const Mat3 back = rz(e.yaw) * ry(e.pitch) * rx(e.roll);
  CHECK(matrix_log_angle(back.transpose() * rz(20) * ry(90) * rx(15)) < 1e-6);
}

TEST_CASE("so3 exp and log are inverse") {
  Gen g(7);
  for (int k = 0; k < 500; ++k) {
    const Vec3 w = g.vec3(-1, 1) * 2.0;
    if (w.norm() > 3.0) continue;
    CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-9);
  }
  CHECK((so3_log(so3_exp(Vec3(1e-12, 0, 0))) - Vec3(1e-12, 0, 0)).norm() < 1e-18);
}

TEST_CASE("retract applies a left increment") {
  Gen g(8);
  const Pose p = g.pose();
  Vec6 d;
  d << 0.1, -0.2, 0.05, 1.0, 2.0, 3.0;
  const Pose r = retract(p, d);
  const Mat3 expected = so3_exp(d.head<3>()).toRotationMatrix() * p.rotation_matrix();
  CHECK((r.rotation_matrix() - expected).norm() < 1e-12);
  CHECK((r.translation - (p.translation + d.tail<3>())).norm() < 1e-12);
}

TEST_CASE("body_to_optical maps forward to the optical axis") {
  const Pose b = body_to_optical();
  CHECK((apply(b, Vec3::UnitX()) - Vec3::UnitZ()).norm() < 1e-12);
  CHECK((apply(b, Vec3::UnitY()) - (-Vec3::UnitX())).norm() < 1e-12);
  CHECK((apply(b, Vec3::UnitZ()) - (-Vec3::UnitY())).norm() < 1e-12);
}
