#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bimcap/depth.hpp"
#include "bimcap/error.hpp"
#include "support.hpp"

using namespace bimcap;

namespace {

Frame frame_from(const std::vector<Vec2>& px, const std::function<double(const Vec2&)>& depth,
                 SemanticClass cls = SemanticClass::wall) {
  Frame f;
  for (const auto& p : px) f.samples.push_back({p.x(), p.y(), depth(p), cls});
  return f;
}

std::vector<Vec2> corners(const CameraModel& cam) {
  const double w = cam.width - 1;
  const double h = cam.height - 1;
  return {Vec2(0, 0), Vec2(w, 0), Vec2(0, h), Vec2(w, h)};
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d1 = cross(a, b, p);
  const double d2 = cross(b, c, p);
  const double d3 = cross(c, a, p);
  const bool neg = d1 < -1e-9 || d2 < -1e-9 || d3 < -1e-9;
  const bool pos = d1 > 1e-9 || d2 > 1e-9 || d3 > 1e-9;
  return !(neg && pos);
}

double hull_area(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  std::vector<Vec2> hull;
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t base = hull.size();
    for (const auto& p : pts) {
      while (hull.size() >= base + 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0) hull.pop_back();
      hull.push_back(p);
    }
    hull.pop_back();
    std::reverse(pts.begin(), pts.end());
  }
  double area = 0.0;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const Vec2& a = hull[k];
    const Vec2& b = hull[(k + 1) % hull.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(area);
}

std::vector<Vec2> random_pixels(test::Gen& g, const CameraModel& cam, int n) {
  std::vector<Vec2> out;
  for (int k = 0; k < n; ++k) out.emplace_back(g.integer(0, cam.width - 1), g.integer(0, cam.height - 1));
  return out;
}

}  // namespace

TEST_CASE("constant field from four corners") {
  const auto cam = test::small_camera();
  const auto dm = densify_linear(frame_from(corners(cam), [](const Vec2&) { return 2.0; }), cam);
  CHECK(dm.valid_count() == 100 * 100);
  for (double d : dm.depth) CHECK(d == 2.0);
}

TEST_CASE("affine field is reproduced inside the hull") {
  const auto cam = test::small_camera();
  test::Gen g(41);
  auto field = [](const Vec2& p) { return 1.0 + 0.01 * p.x() + 0.02 * p.y(); };
  for (int trial = 0; trial < 5; ++trial) {
    auto px = corners(cam);
    for (int k = 0; k < 40; ++k) px.push_back(g.vec2(0, 99));
    const auto dm = densify_linear(frame_from(px, field), cam);
    for (int k = 0; k < 100; ++k) {
      const int u = g.integer(0, 99);
      const int v = g.integer(0, 99);
      REQUIRE(dm.valid(u, v));
      CHECK(std::abs(dm.at(u, v) - field(Vec2(u, v))) < 1e-6);
    }
  }
}

TEST_CASE("inverse-depth space reproduces planar depth") {
  const auto cam = test::small_camera();
  // Plane with 1/depth affine in pixel coordinates.
  auto field = [](const Vec2& p) { return 1.0 / (0.3 + 0.002 * p.x() + 0.001 * p.y()); };
  test::Gen g(42);
  auto px = corners(cam);
  for (int k = 0; k < 20; ++k) px.push_back(g.vec2(0, 99));
  const auto dm = densify_linear(frame_from(px, field), cam, InterpSpace::inverse_depth);
  for (int v = 0; v < 100; v += 7) {
    for (int u = 0; u < 100; u += 7) CHECK(std::abs(dm.at(u, v) - field(Vec2(u, v))) < 1e-9);
  }
}

TEST_CASE("pixels outside the hull are invalid") {
  const auto cam = test::small_camera();
  const auto dm = densify_linear(frame_from({Vec2(10, 10), Vec2(50, 10), Vec2(10, 50)}, [](const Vec2&) { return 3.0; }),
                                 cam);
  CHECK_FALSE(dm.valid(60, 60));
  CHECK_FALSE(dm.valid(0, 0));
  CHECK(dm.valid(20, 20));
  CHECK_FALSE(dm.class_at(60, 60));
  CHECK(dm.class_at(20, 20) == SemanticClass::wall);
}

TEST_CASE("degenerate inputs") {
  const auto cam = test::small_camera();
  auto one = [](const Vec2&) { return 1.0; };
  for (const auto& px : {std::vector<Vec2>{}, std::vector<Vec2>{Vec2(1, 1), Vec2(5, 5)},
                         std::vector<Vec2>{Vec2(1, 1), Vec2(5, 5), Vec2(9, 9), Vec2(20, 20)}}) {
    try {
      densify_linear(frame_from(px, one), cam);
      FAIL("expected degenerate input");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::degenerate_input);
    }
  }
}

TEST_CASE("interpolation reproduces samples and stays within triangle bounds") {
  const auto cam = test::small_camera();
  test::Gen g(43);
  for (int trial = 0; trial < 10; ++trial) {
    auto px = random_pixels(g, cam, 60);
    std::sort(px.begin(), px.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
    px.erase(std::unique(px.begin(), px.end()), px.end());
    std::vector<double> depth;
    Frame f;
    for (const auto& p : px) {
      depth.push_back(g.uniform(0.5, 10.0));
      f.samples.push_back({p.x(), p.y(), depth.back(), SemanticClass::wall});
    }
    const auto dm = densify_linear(f, cam);
    for (std::size_t k = 0; k < px.size(); ++k) {
      const int u = static_cast<int>(px[k].x());
      const int v = static_cast<int>(px[k].y());
      REQUIRE(dm.valid(u, v));
      CHECK(std::abs(dm.at(u, v) - depth[k]) < 1e-9);
    }
    const auto tris = delaunay_triangles(px);
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        if (!dm.valid(u, v)) continue;
        CHECK(dm.at(u, v) > 0.0);
        bool bounded = false;
        for (const auto& t : tris) {
          if (!in_triangle(Vec2(u, v), px[t[0]], px[t[1]], px[t[2]])) continue;
          const double lo = std::min({depth[t[0]], depth[t[1]], depth[t[2]]});
          const double hi = std::max({depth[t[0]], depth[t[1]], depth[t[2]]});
          bounded = bounded || (dm.at(u, v) >= lo && dm.at(u, v) <= hi);
        }
        CHECK(bounded);
      }
    }
  }
}

TEST_CASE("delaunay triangulation has empty circumcircles and covers the hull") {
  test::Gen g(44);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec2> pts;
    for (int k = 0; k < 80; ++k) pts.push_back(Vec2(g.uniform(0, 300), g.uniform(0, 200)));
    const auto tris = delaunay_triangles(pts);
    double area = 0.0;
    for (const auto& t : tris) {
      const Vec2 &a = pts[t[0]], &b = pts[t[1]], &c = pts[t[2]];
      area += 0.5 * std::abs(cross(a, b, c));
      // Circumcenter by the standard determinant formula.
      const double d = 2 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
      const double ux = (a.squaredNorm() * (b.y() - c.y()) + b.squaredNorm() * (c.y() - a.y()) +
                         c.squaredNorm() * (a.y() - b.y())) / d;
      const double uy = (a.squaredNorm() * (c.x() - b.x()) + b.squaredNorm() * (a.x() - c.x()) +
                         c.squaredNorm() * (b.x() - a.x())) / d;
      const Vec2 center(ux, uy);
      const double r = (a - center).norm();
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (k == t[0] || k == t[1] || k == t[2]) continue;
        // Sites are snapped to a 1/16 pixel grid before triangulation.
        CHECK((pts[k] - center).norm() >= r - 0.2);
      }
    }
    CHECK(std::abs(area - hull_area(pts)) / hull_area(pts) < 1e-2);
  }
}

TEST_CASE("nearest-sample classes") {
  const auto cam = test::small_camera();
  test::Gen g(45);
  Frame f;
  for (int k = 0; k < 40; ++k) {
    f.samples.push_back({g.uniform(0, 99), g.uniform(0, 99), 2.0,
                         k % 2 == 0 ? SemanticClass::floor : SemanticClass::wall});
  }
  for (const auto& c : corners(cam)) f.samples.push_back({c.x(), c.y(), 2.0, SemanticClass::ceiling});
  const auto dm = densify_linear(f, cam);
  for (int v = 0; v < 100; v += 3) {
    for (int u = 0; u < 100; u += 3) {
      double best = 1e18;
      SemanticClass cls = SemanticClass::other;
      for (const auto& s : f.samples) {
        const double d = (Vec2(s.u, s.v) - Vec2(u, v)).squaredNorm();
        if (d < best) {
          best = d;
          cls = s.cls;
        }
      }
      CHECK(dm.class_at(u, v) == cls);
    }
  }
}

TEST_CASE("smoothing leaves a constant floor unchanged") {
  DepthMap dm(30, 20);
  std::fill(dm.depth.begin(), dm.depth.end(), 1.5);
  std::fill(dm.label.begin(), dm.label.end(), static_cast<std::uint8_t>(SemanticClass::floor));
  const auto out = smooth_planar_regions(dm);
  for (double d : out.depth) CHECK(d == 1.5);
  CHECK_THROWS_AS(smooth_planar_regions(dm, {SemanticClass::floor}, 0), Error);
}

TEST_CASE("smoothing pulls a floor outlier to the windowed mean") {
  DepthMap dm(31, 31);
  test::Gen g(46);
  for (std::size_t k = 0; k < dm.depth.size(); ++k) {
    dm.depth[k] = 2.0 + g.uniform(-0.01, 0.01);
    dm.label[k] = static_cast<std::uint8_t>(SemanticClass::floor);
  }
  // A wall strip and an invalid column next to the floor.
  for (int v = 0; v < 31; ++v) {
    dm.label[dm.index(0, v)] = static_cast<std::uint8_t>(SemanticClass::wall);
    dm.depth[dm.index(0, v)] = 7.0 + 0.1 * v;
    dm.depth[dm.index(30, v)] = std::numeric_limits<double>::quiet_NaN();
    dm.label[dm.index(30, v)] = kUnlabeled;
  }
  const std::size_t center = dm.index(15, 15);
  dm.depth[center] += 0.5;
  const auto out = smooth_planar_regions(dm, {SemanticClass::floor, SemanticClass::ceiling}, 5);

  // Direct windowed-mean oracle over same-class valid pixels.
  for (int v = 0; v < 31; ++v) {
    for (int u = 0; u < 31; ++u) {
      const std::size_t i = dm.index(u, v);
      if (!dm.valid(u, v) || dm.label[i] != static_cast<std::uint8_t>(SemanticClass::floor)) {
        if (dm.valid(u, v)) {
          CHECK(out.depth[i] == dm.depth[i]);
        } else {
          CHECK(std::isnan(out.depth[i]));
        }
        continue;
      }
      double s = 0.0;
      int n = 0;
      for (int y = std::max(0, v - 5); y <= std::min(30, v + 5); ++y) {
        for (int x = std::max(0, u - 5); x <= std::min(30, u + 5); ++x) {
          const std::size_t j = dm.index(x, y);
          if (dm.valid(x, y) && dm.label[j] == static_cast<std::uint8_t>(SemanticClass::floor)) {
            s += dm.depth[j];
            ++n;
          }
        }
      }
      CHECK(std::abs(out.depth[i] - s / n) < 1e-9);
    }
  }
  double neighbors = 0.0;
  for (int y = 10; y <= 20; ++y) {
    for (int x = 10; x <= 20; ++x) {
      if (x != 15 || y != 15) neighbors += dm.at(x, y);
    }
  }
  CHECK(std::abs(out.depth[center] - neighbors / 120.0) < 0.01);
}

TEST_CASE("lift examples") {
  const auto cam = test::small_camera();
  DepthMap one(100, 100);
  one.depth[one.index(50, 50)] = 2.0;
  one.label[one.index(50, 50)] = static_cast<std::uint8_t>(SemanticClass::wall);
  const auto single = lift_labeled_points(one, cam, Pose::identity(), {SemanticClass::wall}, 1);
  REQUIRE(single.size() == 1);
  CHECK((single.points[0].position - Vec3(0, 0, 2)).norm() < 1e-12);
  CHECK(single.points[0].cls == SemanticClass::wall);

  DepthMap full(100, 100);
  std::fill(full.depth.begin(), full.depth.end(), 1.0);
  for (int v = 0; v < 100; ++v) {
    for (int u = 0; u < 100; ++u) {
      full.label[full.index(u, v)] = static_cast<std::uint8_t>(v < 50 ? SemanticClass::wall : SemanticClass::floor);
    }
  }
  CHECK(lift_labeled_points(full, cam, Pose::identity(), {SemanticClass::wall, SemanticClass::floor}, 4).size() ==
        625);
  for (const auto& p : lift_labeled_points(full, cam, Pose::identity(), {SemanticClass::wall}, 1).points) {
    CHECK(p.cls == SemanticClass::wall);
  }
  CHECK_THROWS_AS(lift_labeled_points(full, cam, Pose::identity(), {SemanticClass::wall}, 0), Error);
}

TEST_CASE("lift of a densified wall frame stays on the wall plane") {
  const auto scene = generate_scene(test::single_room_spec(10.0, 8.0));
  const SceneRaycaster caster(scene);
  const auto cam = test::forward_camera();
  test::Gen g(47);
  for (int trial = 0; trial < 10; ++trial) {
    const double yaw = 90.0 + g.uniform(-15, 15);
    const Pose pose = Pose::from_yaw_pitch_roll(yaw, 0.0, 0.0, Vec3(g.uniform(4, 6), 6.8, 1.25));
    const Frame f = raycast_depth(caster, cam, pose, scanline_pattern(cam, 24, 32));
    const auto dm = densify_linear(f, cam);
    const auto cloud = lift_labeled_points(dm, cam, pose, {SemanticClass::wall}, 1);
    REQUIRE(cloud.size() > 1000);
    for (const auto& p : cloud.points) CHECK(std::abs(p.position.y() - 8.0) < 0.02);
  }
}

TEST_CASE("bilinear sample") {
  DepthMap dm(2, 2);
  dm.depth = {1.0, 2.0, 3.0, 4.0};
  const auto mid = dm.sample(0.5, 0.5);
  REQUIRE(mid);
  CHECK(*mid == doctest::Approx(2.5));
  dm.depth[3] = std::numeric_limits<double>::quiet_NaN();
  const auto near = dm.sample(0.2, 0.2);
  REQUIRE(near);
  CHECK(*near == 1.0);
  CHECK_FALSE(dm.sample(0.9, 0.9));
}
