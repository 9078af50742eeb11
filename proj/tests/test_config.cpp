#include <doctest.h>

#include <functional>
#include <json.hpp>

#include "bimcap/error.hpp"
#include "bimcap/io.hpp"
#include "bimcap/pipeline/config.hpp"
#include "support.hpp"

using namespace bimcap;
using namespace bimcap::pipeline;

namespace {

std::string config_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto path = test::scratch_dir("config_" + name) / "config.json";
  io::write_text(path, text);
  return path;
}

}  // namespace

TEST_CASE("defaults are valid and survive a json round trip") {
  const PipelineConfig cfg;
  cfg.validate();
  const auto j = to_json(cfg);
  CHECK(to_json(from_json(j)) == j);
  CHECK(to_json(load_config(std::nullopt)) == j);
  CHECK(j.at("ablation").at("rows").size() == 5);
}

TEST_CASE("config file overrides defaults") {
  const auto path = write_config("partial", R"({"sampling": {"density": 250}, "terms": {"wall": {"weight": 3}},
    "ablation": {"rows": ["G", "F", "G,F,W", "G,F,W,Co,Ce"]}})");
  const auto cfg = load_config(path);
  CHECK(cfg.sampling.density == 250.0);
  CHECK(cfg.terms[Term::wall].weight == 3.0);
  CHECK(cfg.terms[Term::floor].weight == 1.0);
  REQUIRE(cfg.ablation_rows.size() == 4);
  CHECK(cfg.ablation_rows[2] == std::vector<Term>{Term::geometric, Term::floor, Term::wall});
}

TEST_CASE("unknown keys are rejected by name") {
  const auto path = write_config("unknown", R"({"sampling": {"densty": 250}})");
  CHECK(config_error([&] { load_config(path); }).find("sampling.densty") != std::string::npos);
  const auto top = write_config("unknown_top", R"({"colour": 1})");
  CHECK(config_error([&] { load_config(top); }).find("colour") != std::string::npos);
  CHECK(config_error([] { load_config(std::nullopt, {"solver.max_iters=3"}); }).find("solver.max_iters") !=
        std::string::npos);
}

TEST_CASE("type mismatches and invalid values are config errors") {
  const auto wrong = write_config("type", R"({"sampling": {"density": "dense"}})");
  CHECK(config_error([&] { load_config(wrong); }).find("sampling.density") != std::string::npos);
  const auto bad_json = write_config("json", "{not json");
  config_error([&] { load_config(bad_json); });
  config_error([] { load_config(std::nullopt, {"sampling.density=-1"}); });
  config_error([] { load_config(std::nullopt, {"depth.interp_space=cubic"}); });
  config_error([] { load_config(std::nullopt, {"drift.target_ate_pos=0.3"}); });
  config_error([] { load_config(std::nullopt, {"floorplan.min_hole_area=-0.1"}); });
  config_error([] { load_config(std::nullopt, {"depth.max_bend=0"}); });
  config_error([] { load_config(std::nullopt, {"no_equals_sign"}); });
  config_error([] { load_config(std::nullopt, {"terms=1"}); });
}

TEST_CASE("set overrides apply in order") {
  const auto cfg = load_config(std::nullopt, {"sampling.density=100", "sampling.density=200",
                                              "terms.column.enabled=false", "output_dir=/tmp/x",
                                              "drift.target_ate_pos=0.3", "drift.target_ate_rot=8.8",
                                              "solver.fix_first_pose=on"});
  CHECK(cfg.sampling.density == 200.0);
  CHECK_FALSE(cfg.terms[Term::column].enabled);
  CHECK(cfg.output_dir == fs::path("/tmp/x"));
  CHECK(cfg.drift.target_ate_pos.value() == 0.3);
  CHECK(cfg.drift.target_ate_rot.value() == 8.8);
  CHECK(cfg.solver.fix_first_pose == FixFirstPose::on);

  const auto path = write_config("layered", R"({"sampling": {"density": 50}})");
  CHECK(load_config(path, {"sampling.density=75"}).sampling.density == 75.0);
}

TEST_CASE("term lists") {
  CHECK(parse_term_list("G,F,W") == std::vector<Term>{Term::geometric, Term::floor, Term::wall});
  CHECK(parse_term_list("geometric+floor") == std::vector<Term>{Term::geometric, Term::floor});
  CHECK(parse_term_list("Co,Ce,Co") == std::vector<Term>{Term::column, Term::ceiling});
  config_error([] { parse_term_list("G,X"); });
  config_error([] { parse_term_list(""); });
}
