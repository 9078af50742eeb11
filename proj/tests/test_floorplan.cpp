#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "bimcap/error.hpp"
#include "bimcap/floorplan.hpp"
#include "support.hpp"

using namespace bimcap;

namespace {

using test::directed_hausdorff;
using test::distance_to_set;
using test::hausdorff;
using test::rectangle;

std::vector<Vec2> line_points(const Vec2& a, const Vec2& b, double spacing) {
  std::vector<Vec2> out;
  const int n = static_cast<int>(std::round((b - a).norm() / spacing));
  for (int k = 0; k <= n; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / n));
  return out;
}

std::vector<Vec2> ring_points(double x0, double y0, double x1, double y1, double spacing) {
  std::vector<Vec2> out;
  for (const auto& s : rectangle(x0, y0, x1, y1)) {
    const auto pts = line_points(s.start, s.end, spacing);
    out.insert(out.end(), pts.begin(), pts.end());
  }
  return out;
}

// Duplicates every point so each occupied cell clears min_hits = 2.
std::vector<Vec2> doubled(const std::vector<Vec2>& pts) {
  std::vector<Vec2> out;
  for (const auto& p : pts) {
    out.push_back(p);
    out.push_back(p + Vec2(1e-4, 1e-4));
  }
  return out;
}

bool endpoints_near_cells(const std::vector<Segment2D>& segs, const OccupancyRaster& r, double tol) {
  for (const auto& s : segs) {
    for (const Vec2& e : {s.start, s.end}) {
      bool ok = false;
      for (int y = 0; y < r.rows && !ok; ++y) {
        for (int x = 0; x < r.cols && !ok; ++x) {
          ok = r.occupied(x, y) && (r.cell_center(x, y) - e).norm() <= tol;
        }
      }
      if (!ok) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("slab_filter examples") {
  SemanticPointCloud cloud;
  cloud.points.push_back({Vec3(1, 2, 0.1), SemanticClass::wall});
  cloud.points.push_back({Vec3(3, 4, 0.5), SemanticClass::wall});
  cloud.points.push_back({Vec3(5, 6, 0.0), SemanticClass::floor});
  const auto walls = slab_filter(cloud, 0.0, 0.2, SemanticClass::wall);
  REQUIRE(walls.size() == 1);
  CHECK(walls[0] == Vec2(1, 2));
  const auto floors = slab_filter(cloud, 0.0, 0.2, SemanticClass::floor);
  CHECK(floors.size() == 1);
  CHECK(slab_filter(cloud, 0.0, 0.2, SemanticClass::column).empty());
  CHECK(slab_filter(SemanticPointCloud{}, 0.0, 0.2, SemanticClass::wall).empty());
  CHECK_THROWS_AS(slab_filter(cloud, 0.0, 0.0, SemanticClass::wall), Error);
}

TEST_CASE("rasterize threshold rule") {
  const std::vector<Vec2> one = {Vec2(0.5, 0.5)};
  const auto r2 = rasterize(one, 0.02, 2);
  CHECK(r2.cols == 1);
  CHECK(r2.rows == 1);
  CHECK(r2.occupied_count() == 0);
  const auto r1 = rasterize(one, 0.02, 1);
  CHECK(r1.occupied_count() == 1);
  const auto empty = rasterize({}, 0.02, 2);
  CHECK(empty.cols == 0);
  CHECK(empty.rows == 0);
  CHECK_THROWS_AS(rasterize(one, 0.0, 2), Error);
}

TEST_CASE("rasterize matches a direct binning oracle") {
  const auto pts = line_points(Vec2(0, 0), Vec2(1, 0), 0.005);
  const auto r = rasterize(pts, 0.02, 2);
  std::map<long, int> bins;
  for (const auto& p : pts) bins[static_cast<long>(std::floor(p.x() / 0.02))]++;
  std::size_t expected = 0;
  for (const auto& [bin, n] : bins) {
    if (n >= 2) ++expected;
  }
  CHECK(r.rows == 1);
  CHECK(r.occupied_count() == expected);
  CHECK(expected >= 49);
  CHECK(expected <= 51);
  for (const auto& [bin, n] : bins) CHECK(r.occupied(static_cast<int>(bin), 0) == (n >= 2));
}

TEST_CASE("rasterize origin snaps to the grid and covers all points") {
  test::Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pts;
    for (int k = 0; k < 200; ++k) pts.push_back(g.vec2(-3, 3));
    const auto r = rasterize(pts, 0.05, 1);
    CHECK(std::abs(r.origin.x() / 0.05 - std::round(r.origin.x() / 0.05)) < 1e-9);
    for (const auto& p : pts) {
      const int ix = static_cast<int>(std::floor((p.x() - r.origin.x()) / 0.05 + 1e-9));
      const int iy = static_cast<int>(std::floor((p.y() - r.origin.y()) / 0.05 + 1e-9));
      CHECK(ix >= 0);
      CHECK(iy >= 0);
      CHECK(ix < r.cols);
      CHECK(iy < r.rows);
    }
  }
}

TEST_CASE("vectorize a rectangular wall ring") {
  const auto r = rasterize(doubled(ring_points(0, 0, 4, 3, 0.005)), 0.02, 2);
  const auto segs = vectorize(r);
  REQUIRE_FALSE(segs.empty());
  CHECK(hausdorff(segs, rectangle(0, 0, 4, 3)) <= 2 * 0.02);
  for (const auto& s : segs) {
    CHECK(s.cls == SemanticClass::wall);
    CHECK(s.length() >= 0.05);
  }
  CHECK(endpoints_near_cells(segs, r, 2 * 0.02));
}

TEST_CASE("vectorize single cell yields nothing") {
  const auto r = rasterize({Vec2(1, 1)}, 0.02, 1);
  CHECK(vectorize(r).empty());
}

TEST_CASE("vectorize keeps parallel runs apart") {
  auto pts = line_points(Vec2(0, 0), Vec2(2, 0), 0.005);
  const auto upper = line_points(Vec2(0, 1), Vec2(2, 1), 0.005);
  pts.insert(pts.end(), upper.begin(), upper.end());
  const auto segs = vectorize(rasterize(doubled(pts), 0.02, 2));
  int low = 0;
  int high = 0;
  for (const auto& s : segs) {
    const bool a_low = std::abs(s.start.y()) < 0.1;
    const bool b_low = std::abs(s.end.y()) < 0.1;
    const bool a_high = std::abs(s.start.y() - 1) < 0.1;
    const bool b_high = std::abs(s.end.y() - 1) < 0.1;
    CHECK(((a_low && b_low) || (a_high && b_high)));
    if (a_low && b_low) ++low;
    if (a_high && b_high) ++high;
  }
  CHECK(low >= 1);
  CHECK(high >= 1);
}

TEST_CASE("vectorize is rotation consistent") {
  test::Gen g(12);
  for (int trial = 0; trial < 5; ++trial) {
    const double x0 = g.uniform(-1, 1);
    const double y0 = g.uniform(-1, 1);
    auto pts = doubled(ring_points(x0, y0, x0 + g.uniform(1.5, 3), y0 + g.uniform(1.5, 3), 0.005));
    const auto inner = line_points(Vec2(x0 + 0.5, y0 + 0.7), Vec2(x0 + 1.2, y0 + 0.7), 0.005);
    const auto extra = doubled(inner);
    pts.insert(pts.end(), extra.begin(), extra.end());
    const auto segs = vectorize(rasterize(pts, 0.02, 2));
    std::vector<Vec2> rotated;
    for (const auto& p : pts) rotated.emplace_back(-p.y(), p.x());
    const auto rsegs = vectorize(rasterize(rotated, 0.02, 2));
    std::vector<Segment2D> expected;
    for (const auto& s : segs) {
      expected.push_back({Vec2(-s.start.y(), s.start.x()), Vec2(-s.end.y(), s.end.x()), s.cls});
    }
    CHECK(hausdorff(rsegs, expected) <= 2 * 0.02);
  }
}

TEST_CASE("vectorize endpoints stay near occupied cells on random blobs") {
  test::Gen g(13);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec2> pts;
    for (int k = 0; k < 4; ++k) {
      const Vec2 a = g.vec2(0, 2);
      const Vec2 b = g.vec2(0, 2);
      const auto run = line_points(a, b, 0.004);
      pts.insert(pts.end(), run.begin(), run.end());
    }
    const auto r = rasterize(doubled(pts), 0.02, 2);
    CHECK(endpoints_near_cells(vectorize(r), r, 2 * 0.02));
  }
}

TEST_CASE("douglas_peucker keeps endpoints and respects tolerance") {
  test::Gen g(14);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> poly;
    for (int k = 0; k < 40; ++k) poly.emplace_back(k * 0.1, g.normal(0, 0.05));
    const auto simple = douglas_peucker(poly, 0.04);
    CHECK(simple.front() == poly.front());
    CHECK(simple.back() == poly.back());
    std::vector<Segment2D> chain;
    for (std::size_t k = 0; k + 1 < simple.size(); ++k) chain.push_back({simple[k], simple[k + 1]});
    for (const auto& p : poly) CHECK(distance_to_set(p, chain) <= 0.04 + 1e-12);
  }
}

TEST_CASE("build_floorplan on a sampled single room") {
  SceneSpec spec = test::single_room_spec(4.0, 3.0);
  spec.columns.push_back({2.0, 1.5, 0.4});
  const auto scene = generate_scene(spec);
  const auto cloud = sample_uniform(scene, 4000.0, 3);
  const auto plan = build_floorplan(cloud, 0.0, 2.5);
  const auto walls = plan.segments_of(SemanticClass::wall);
  const auto columns = plan.segments_of(SemanticClass::column);
  REQUIRE_FALSE(walls.empty());
  REQUIRE_FALSE(columns.empty());

  auto faces = rectangle(0, 0, 4, 3);
  const auto outer = rectangle(-0.1, -0.1, 4.1, 3.1);
  faces.insert(faces.end(), outer.begin(), outer.end());
  CHECK(hausdorff(walls, faces) <= 2 * 0.02);
  // Every side of the room has plan coverage.
  CHECK(directed_hausdorff(rectangle(0, 0, 4, 3), walls) <= 2 * 0.02);

  CHECK(hausdorff(columns, rectangle(1.8, 1.3, 2.2, 1.7, SemanticClass::column)) <= 2 * 0.02);
  CHECK(std::abs(plan.floor.offset - 0.0) < 1e-9);
  CHECK(std::abs(plan.ceiling.offset - 2.5) < 1e-9);
  CHECK(plan.floor.normal == Vec3::UnitZ());
  CHECK(plan.ceiling.normal == Vec3::UnitZ());
  for (const auto& s : plan.segments) CHECK(s.length() >= 0.05);
  for (const auto& s : walls) {
    const Vec2 d = (s.end - s.start).cwiseAbs();
    CHECK(rad2deg(std::atan2(std::min(d.x(), d.y()), std::max(d.x(), d.y()))) < 0.1);
  }

  // Deterministic for a fixed cloud.
  const auto again = build_floorplan(cloud, 0.0, 2.5);
  REQUIRE(again.segments.size() == plan.segments.size());
  for (std::size_t k = 0; k < plan.segments.size(); ++k) {
    CHECK(again.segments[k].start == plan.segments[k].start);
    CHECK(again.segments[k].end == plan.segments[k].end);
  }
}

TEST_CASE("build_floorplan ceiling fallback and empty plan") {
  const auto scene = generate_scene(test::single_room_spec(2.0, 2.0));
  auto cloud = sample_uniform(scene, 2000.0, 4);
  SemanticPointCloud no_ceiling;
  for (const auto& p : cloud.points) {
    if (p.cls != SemanticClass::ceiling) no_ceiling.points.push_back(p);
  }
  const auto plan = build_floorplan(no_ceiling, 0.0, 2.75);
  CHECK(plan.ceiling.offset == 2.75);

  try {
    build_floorplan(cloud.filtered(SemanticClass::floor), 0.0, 2.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_plan);
  }
}

TEST_CASE("exact footprint plan of a single room") {
  SceneSpec spec = test::single_room_spec(4.0, 3.0);
  spec.columns.push_back({2.0, 1.5, 0.4});
  const auto plan = exact_footprint_plan(generate_scene(spec));
  auto faces = rectangle(0, 0, 4, 3);
  const auto outer = rectangle(-0.1, -0.1, 4.1, 3.1);
  faces.insert(faces.end(), outer.begin(), outer.end());
  // End caps where the side walls meet the long walls.
  std::vector<Segment2D> caps = faces;
  for (double x : {-0.1, 4.0}) {
    for (double y : {0.0, 3.0}) caps.push_back({Vec2(x, y), Vec2(x + 0.1, y)});
  }
  const auto walls = plan.segments_of(SemanticClass::wall);
  CHECK(directed_hausdorff(faces, walls) < 1e-9);
  CHECK(directed_hausdorff(walls, caps) < 1e-9);
  CHECK(hausdorff(plan.segments_of(SemanticClass::column), rectangle(1.8, 1.3, 2.2, 1.7)) < 1e-9);
}
