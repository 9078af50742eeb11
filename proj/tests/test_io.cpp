#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include <json.hpp>

#include "bimcap/error.hpp"
#include "bimcap/io.hpp"
#include "support.hpp"

using namespace bimcap;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("tum round trip is exact") {
  test::Gen g(71);
  Trajectory t;
  for (int k = 0; k < 100; ++k) t.poses.push_back({0.1 * k + g.uniform(0, 0.01), g.pose(50.0)});
  const auto back = io::parse_tum(io::format_tum(t));
  REQUIRE(back.size() == t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(back.poses[k].timestamp == t.poses[k].timestamp);
    CHECK(back.poses[k].pose.translation == t.poses[k].pose.translation);
    CHECK(back.poses[k].pose.rotation.coeffs() == t.poses[k].pose.rotation.coeffs());
  }
  CHECK(io::format_tum(back) == io::format_tum(t));

  const auto dir = test::scratch_dir("tum");
  io::write_tum(dir / "nested" / "t.tum", t);
  CHECK(io::format_tum(io::read_tum(dir / "nested" / "t.tum")) == io::format_tum(t));
}

TEST_CASE("tum parsing") {
  const auto t = io::parse_tum("# header\n\n1.0 1 2 3 0 0 0 1\n  \n2.0 4 5 6 0 0 1 0\n");
  REQUIRE(t.size() == 2);
  CHECK(t.poses[1].pose.translation == Vec3(4, 5, 6));
  CHECK(code_of([] { io::parse_tum("1.0 1 2 3 0 0 0\n"); }) == ErrorCode::parse);
  CHECK(code_of([] { io::parse_tum("1.0 1 2 x 0 0 0 1\n"); }) == ErrorCode::parse);
  CHECK(message_of([] { io::parse_tum("bad\n", "est.tum"); }).find("est.tum") != std::string::npos);
  CHECK(code_of([] { io::read_tum("/nonexistent/bimcap/t.tum"); }) == ErrorCode::io);
}

TEST_CASE("ply round trip keeps float precision and classes") {
  test::Gen g(72);
  SemanticPointCloud cloud;
  for (int k = 0; k < 500; ++k) {
    cloud.points.push_back({g.vec3(-20, 20), static_cast<SemanticClass>(g.integer(0, 5))});
  }
  const auto back = io::parse_ply(io::format_ply(cloud));
  REQUIRE(back.size() == cloud.size());
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    for (int a = 0; a < 3; ++a) {
      CHECK(back.points[k].position[a] == static_cast<double>(static_cast<float>(cloud.points[k].position[a])));
    }
    CHECK(back.points[k].cls == cloud.points[k].cls);
  }
  CHECK(io::format_ply(back) == io::format_ply(cloud));
  CHECK(code_of([] { io::parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3 0\n"); }) ==
        ErrorCode::parse);
  CHECK(code_of([] { io::parse_ply("not a ply\n"); }) == ErrorCode::parse);
}

TEST_CASE("frames and correspondences round trip") {
  test::Gen g(73);
  std::vector<Frame> frames;
  for (int id = 0; id < 4; ++id) {
    Frame f{id, 0.1 * id, {}};
    for (int k = 0; k < 50; ++k) {
      f.samples.push_back({g.uniform(0, 320), g.uniform(0, 240), g.uniform(0.5, 9), static_cast<SemanticClass>(g.integer(0, 5))});
    }
    frames.push_back(f);
  }
  const auto dir = test::scratch_dir("frames");
  io::write_frames(dir, frames);
  const auto back = io::read_frames(dir);
  REQUIRE(back.size() == frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    CHECK(back[k].id == frames[k].id);
    CHECK(back[k].timestamp == frames[k].timestamp);
    CHECK(io::format_frame_csv(back[k]) == io::format_frame_csv(frames[k]));
    CHECK(back[k].samples[7].depth == frames[k].samples[7].depth);
  }

  std::vector<Correspondence> corr;
  for (int k = 0; k < 30; ++k) corr.push_back({k % 3, k % 3 + 1, g.uniform(0, 320), g.uniform(0, 240), g.uniform(0, 320), g.uniform(0, 240)});
  io::write_correspondences(dir / "c.csv", corr);
  const auto cb = io::read_correspondences(dir / "c.csv");
  REQUIRE(cb.size() == corr.size());
  CHECK(cb[5].u_j == corr[5].u_j);
  CHECK(cb[5].frame_j == corr[5].frame_j);
  CHECK(code_of([] { io::parse_frame_csv("u,v,depth,class\n1,2,3,sofa\n"); }) == ErrorCode::parse);
  CHECK(code_of([] { io::parse_correspondences("frame_i,u_i,v_i,frame_j,u_j,v_j\n0,1,2\n"); }) == ErrorCode::parse);
}

TEST_CASE("depth binary layout and round trip") {
  DepthMap dm(3, 2);
  dm.depth = {1.5, std::numeric_limits<double>::quiet_NaN(), 2.25, 3.0, 0.1, 7.0};
  const std::string bytes = io::encode_depth(dm);
  REQUIRE(bytes.size() == 8 + 6 * 4);
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  std::memcpy(&w, bytes.data(), 4);
  std::memcpy(&h, bytes.data() + 4, 4);
  CHECK(w == 3);
  CHECK(h == 2);
  float first = 0;
  std::memcpy(&first, bytes.data() + 8, 4);
  CHECK(first == 1.5f);
  const auto back = io::decode_depth(bytes);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(std::isnan(back.depth[1]));
  CHECK(back.depth[4] == static_cast<double>(0.1f));
  CHECK(code_of([&] { io::decode_depth(bytes.substr(0, 20)); }) == ErrorCode::parse);
}

TEST_CASE("plan json round trip at six decimals") {
  VectorFloorPlan plan;
  plan.segments = {{Vec2(0.1234564, 2), Vec2(3, 4), SemanticClass::wall},
                   {Vec2(1, 1), Vec2(1.4, 1), SemanticClass::column}};
  plan.floor = Plane::horizontal(0.0);
  plan.ceiling = Plane::horizontal(2.5);
  const auto back = io::parse_plan(io::format_plan(plan));
  REQUIRE(back.segments.size() == 2);
  CHECK(back.segments[0].start.x() == doctest::Approx(0.123456).epsilon(1e-12));
  CHECK(back.segments[1].cls == SemanticClass::column);
  CHECK(back.ceiling.offset == 2.5);
  CHECK(io::format_plan(back) == io::format_plan(plan));
  CHECK(code_of([] { io::parse_plan("{\"segments\": [{\"class\": \"wall\"}]}"); }) == ErrorCode::parse);
}

TEST_CASE("scene spec and solve report round trip") {
  SceneSpec spec = test::single_room_spec(5, 4);
  spec.columns.push_back({2, 2, 0.3});
  spec.doors.push_back({5, 2, 0.9});
  const auto text = io::format_scene_spec(spec);
  CHECK(io::format_scene_spec(io::parse_scene_spec(text)) == text);
  CHECK(code_of([] { io::parse_scene_spec("{\"rooms\": 3}"); }) == ErrorCode::parse);

  SolveReport rep;
  rep.iterations = 3;
  rep.initial_cost = 1.25;
  rep.final_cost = 0.5;
  rep.termination = Termination::stalled;
  rep.history = {{0, 1.25, 1e-4, 0.3, 8.8}, {1, 0.75, 1e-5, std::nullopt, std::nullopt}};
  rep.active_residuals = {1, 2, 3, 4, 5};
  const auto back = io::parse_solve_report(io::format_solve_report(rep));
  CHECK(back.iterations == 3);
  CHECK(back.final_cost == 0.5);
  CHECK(back.termination == Termination::stalled);
  REQUIRE(back.history.size() == 2);
  CHECK(back.history[0].ate_rot.value() == 8.8);
  CHECK_FALSE(back.history[1].ate_pos.has_value());
  CHECK(back.active_residuals[4] == 5);
  CHECK(io::format_solve_report(back) == io::format_solve_report(rep));
}

TEST_CASE("metrics outputs") {
  MetricsReport m;
  m.ate.ate_pos = 0.25;
  m.ate.ate_rot = 3.5;
  m.mme = -2.0;
  const auto j = nlohmann::json::parse(io::format_metrics_json(m));
  CHECK(j.at("ate_pos").get<double>() == 0.25);
  CHECK(j.at("mme").get<double>() == -2.0);
  const auto header = io::metrics_csv_header();
  const auto row = io::format_metrics_csv_row(m);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
  CHECK(header.rfind("ATE_pos,ATE_rot", 0) == 0);
}

TEST_CASE("pgm rows run top to bottom in y") {
  OccupancyRaster r;
  r.resolution = 0.1;
  r.cols = 2;
  r.rows = 2;
  r.cells = {1, 0, 0, 0};  // (0, 0) is the lowest y
  const auto text = io::format_pgm(r);
  CHECK(text.rfind("P2\n2 2\n255\n", 0) == 0);
  CHECK(text.find("0 0\n255 0\n") != std::string::npos);
}
