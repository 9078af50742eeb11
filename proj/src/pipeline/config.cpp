#include "bimcap/pipeline/config.hpp"

#include <cmath>

#include "bimcap/error.hpp"
#include "bimcap/io.hpp"

namespace bimcap::pipeline {
namespace {

using json = nlohmann::json;

[[noreturn]] void config_fail(const std::string& message) { throw Error(ErrorCode::config, message); }

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) config_fail("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = join_path(path, key);
    if (!base.contains(key)) config_fail("unknown config key '" + where + "'");
    json& target = base[key];
    if (target.is_object()) {
      merge(target, value, where);
    } else {
      target = value;
    }
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      node = &node->at(key);
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  double number(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number()) config_fail("config key '" + path + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) config_fail("config key '" + path + "' must be finite");
    return d;
  }

  std::optional<double> optional_number(const std::string& path) const {
    if (at(path).is_null()) return std::nullopt;
    return number(path);
  }

  long long integer(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
      config_fail("config key '" + path + "' must be an integer");
    }
    return v.is_number_integer() ? v.get<long long>() : static_cast<long long>(v.get<double>());
  }

  std::uint64_t seed(const std::string& path) const {
    const long long v = integer(path);
    if (v < 0) config_fail("config key '" + path + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  bool boolean(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_boolean()) config_fail("config key '" + path + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_string()) config_fail("config key '" + path + "' must be a string");
    return v.get<std::string>();
  }

  std::optional<fs::path> optional_path(const std::string& path) const {
    const json& v = at(path);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) config_fail("config key '" + path + "' must be a string or null");
    if (v.get<std::string>().empty()) return std::nullopt;
    return fs::path(v.get<std::string>());
  }

 private:
  const json& root_;
};

json term_json(const TermSettings& s) {
  return {{"enabled", s.enabled}, {"weight", s.weight}, {"huber_delta", s.huber_delta}};
}

std::string term_list_string(const std::vector<Term>& terms) {
  std::string out;
  for (Term t : terms) {
    if (!out.empty()) out += ',';
    out += term_label(t);
  }
  return out;
}

}  // namespace

SceneSpec reference_scene_spec() {
  SceneSpec spec;
  spec.rooms = {{0.0, 0.0, 4.9, 8.0}, {5.0, 0.0, 5.0, 8.0}};
  spec.wall_thickness = 0.1;
  spec.floor_z = 0.0;
  spec.ceiling_z = 2.5;
  spec.columns = {{2.5, 5.5, 0.4}, {7.5, 2.5, 0.4}};
  spec.doors = {{4.95, 4.0, 1.0}};
  return spec;
}

CameraModel CameraConfig::model() const {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  if (mount == "forward") {
    cam.extrinsic = body_to_optical();
  } else if (mount != "identity") {
    config_fail("camera.mount must be 'forward' or 'identity'");
  }
  return cam;
}

std::vector<Term> parse_term_list(const std::string& text) {
  std::vector<Term> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::optional<Term> term;
    for (Term t : kAllTerms) {
      if (token == term_label(t) || token == term_name(t)) term = t;
    }
    if (!term) config_fail("unknown term '" + token + "' (expected G, F, W, Co or Ce)");
    if (std::find(out.begin(), out.end(), *term) == out.end()) out.push_back(*term);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '+' || c == ' ') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  if (out.empty()) config_fail("empty term list");
  return out;
}

void PipelineConfig::validate() const {
  if (!(sampling.density > 0.0)) config_fail("sampling.density must be > 0");
  if (!(floorplan.resolution > 0.0)) config_fail("floorplan.resolution must be > 0");
  if (!(floorplan.half_band > 0.0)) config_fail("floorplan.half_band must be > 0");
  if (floorplan.min_hits < 1) config_fail("floorplan.min_hits must be >= 1");
  if (floorplan.closing_radius < 0) config_fail("floorplan.closing_radius must be >= 0");
  if (!(floorplan.min_hole_area >= 0.0)) config_fail("floorplan.min_hole_area must be >= 0");
  try {
    camera.model().validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_fail(std::string("camera: ") + e.what());
  }
  if (trajectory.frames < 2) config_fail("trajectory.frames must be >= 2");
  if (trajectory.waypoints.size() < 2) config_fail("trajectory.waypoints needs at least two points");
  if (simulator.pattern_rows < 2 || simulator.pattern_cols < 2) config_fail("simulator pattern needs >= 2 rows/cols");
  if (simulator.correspondences.per_pair < 1) config_fail("simulator.per_pair must be > 0");
  if (simulator.correspondences.window < 1) config_fail("simulator.window must be >= 1");
  if (!(simulator.correspondences.pixel_noise_sigma >= 0.0)) config_fail("simulator.pixel_noise_sigma must be >= 0");
  if (drift.config.sigma_t < 0.0 || drift.config.sigma_pitch < 0.0 || drift.config.sigma_yaw < 0.0) {
    config_fail("drift sigmas must be >= 0");
  }
  if (drift.target_ate_pos.has_value() != drift.target_ate_rot.has_value()) {
    config_fail("drift.target_ate_pos and drift.target_ate_rot must be set together");
  }
  if ((drift.target_ate_pos && *drift.target_ate_pos < 0.0) || (drift.target_ate_rot && *drift.target_ate_rot < 0.0)) {
    config_fail("drift targets must be >= 0");
  }
  if (depth.smooth_radius < 1) config_fail("depth.smooth_radius must be >= 1");
  if (depth.lift.lift_stride < 1) config_fail("depth.lift_stride must be >= 1");
  if (!(depth.lift.max_depth_jump > 0.0)) config_fail("depth.max_depth_jump must be > 0");
  if (!(depth.lift.max_bend > 0.0)) config_fail("depth.max_bend must be > 0");
  try {
    terms.validate();
  } catch (const Error& e) {
    config_fail(std::string("terms: ") + e.what());
  }
  if (solver.max_outer_iters < 0) config_fail("solver.max_outer_iters must be >= 0");
  if (!(solver.rel_cost_tol >= 0.0)) config_fail("solver.rel_cost_tol must be >= 0");
  if (!(solver.lm_lambda_init > 0.0)) config_fail("solver.lm_lambda_init must be > 0");
  if (!(solver.lm_lambda_factor > 1.0)) config_fail("solver.lm_lambda_factor must be > 1");
  if (!(metrics.neighborhood.radius > 0.0)) config_fail("metrics.radius must be > 0");
  if (metrics.neighborhood.min_neighbors < 4) config_fail("metrics.min_neighbors must be >= 4");
  if (metrics.map_stride < 1 || metrics.reference_stride < 1) config_fail("metrics strides must be >= 1");
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  json j;
  j["output_dir"] = cfg.output_dir.string();
  j["threads"] = cfg.threads;
  j["scene"] = {{"spec", json::parse(io::format_scene_spec(cfg.scene.spec))},
                {"spec_path", cfg.scene.spec_path ? json(cfg.scene.spec_path->string()) : json(nullptr)},
                {"obj_dir", cfg.scene.obj_dir ? json(cfg.scene.obj_dir->string()) : json(nullptr)}};
  j["sampling"] = {{"density", cfg.sampling.density}, {"seed", cfg.sampling.seed}};
  const auto& fp = cfg.floorplan;
  j["floorplan"] = {{"half_band", fp.half_band},
                    {"resolution", fp.resolution},
                    {"min_hits", fp.min_hits},
                    {"min_segment_length", fp.min_segment_length},
                    {"simplify_tolerance_cells", fp.simplify_tolerance_cells},
                    {"merge_angle_deg", fp.merge_angle_deg},
                    {"merge_gap_cells", fp.merge_gap_cells},
                    {"closing_radius", fp.closing_radius},
                    {"min_hole_area", fp.min_hole_area}};
  const auto& cam = cfg.camera;
  j["camera"] = {{"fx", cam.fx},       {"fy", cam.fy},         {"cx", cam.cx},       {"cy", cam.cy},
                 {"width", cam.width}, {"height", cam.height}, {"mount", cam.mount}};
  json wp = json::array();
  for (const auto& w : cfg.trajectory.waypoints) wp.push_back({w.x(), w.y()});
  j["trajectory"] = {{"waypoints", wp}, {"frames", cfg.trajectory.frames}, {"height", cfg.trajectory.height}};
  const auto& cp = cfg.simulator.correspondences;
  j["simulator"] = {{"pattern_rows", cfg.simulator.pattern_rows},
                    {"pattern_cols", cfg.simulator.pattern_cols},
                    {"per_pair", cp.per_pair},
                    {"pixel_noise_sigma", cp.pixel_noise_sigma},
                    {"window", cp.window},
                    {"seed", cp.seed},
                    {"attempts_per_match", cp.attempts_per_match},
                    {"occlusion_tolerance", cp.occlusion_tolerance}};
  const auto& dc = cfg.drift;
  j["drift"] = {{"sigma_t", dc.config.sigma_t},
                {"sigma_pitch", dc.config.sigma_pitch},
                {"sigma_yaw", dc.config.sigma_yaw},
                {"seed", dc.config.seed},
                {"target_ate_pos", dc.target_ate_pos ? json(*dc.target_ate_pos) : json(nullptr)},
                {"target_ate_rot", dc.target_ate_rot ? json(*dc.target_ate_rot) : json(nullptr)}};
  j["depth"] = {{"interp_space", cfg.depth.interp_space == InterpSpace::depth ? "depth" : "inverse_depth"},
                {"smooth", cfg.depth.smooth},
                {"smooth_radius", cfg.depth.smooth_radius},
                {"lift_stride", cfg.depth.lift.lift_stride},
                {"max_depth_jump", cfg.depth.lift.max_depth_jump},
                {"max_bend", cfg.depth.lift.max_bend}};
  json terms = json::object();
  for (Term t : kAllTerms) terms[std::string(term_name(t))] = term_json(cfg.terms[t]);
  terms["assoc_gate"] = cfg.terms.assoc_gate;
  j["terms"] = terms;
  const auto& so = cfg.solver;
  const char* fix = so.fix_first_pose == FixFirstPose::automatic ? "auto"
                    : so.fix_first_pose == FixFirstPose::on      ? "on"
                                                                 : "off";
  j["solver"] = {{"max_outer_iters", so.max_outer_iters},
                 {"rel_cost_tol", so.rel_cost_tol},
                 {"lm_lambda_init", so.lm_lambda_init},
                 {"lm_lambda_factor", so.lm_lambda_factor},
                 {"max_consecutive_rejects", so.max_consecutive_rejects},
                 {"fix_first_pose", fix},
                 {"translation_only", so.translation_only}};
  j["metrics"] = {{"radius", cfg.metrics.neighborhood.radius},
                  {"min_neighbors", cfg.metrics.neighborhood.min_neighbors},
                  {"nnd_mode", cfg.metrics.nnd_mode == NndMode::to_reference ? "to_reference" : "within_cloud"},
                  {"map_stride", cfg.metrics.map_stride},
                  {"reference_stride", cfg.metrics.reference_stride}};
  json rows = json::array();
  for (const auto& row : cfg.ablation_rows) rows.push_back(term_list_string(row));
  j["ablation"] = {{"rows", rows}};
  return j;
}

PipelineConfig from_json(const nlohmann::json& j) {
  const Reader r(j);
  PipelineConfig cfg;
  cfg.output_dir = r.string("output_dir");
  const long long threads = r.integer("threads");
  if (threads < 0) config_fail("config key 'threads' must be >= 0");
  cfg.threads = static_cast<unsigned>(threads);

  try {
    cfg.scene.spec = io::parse_scene_spec(r.at("scene.spec").dump(), "scene.spec");
  } catch (const Error& e) {
    config_fail(std::string("config key 'scene.spec': ") + e.what());
  }
  cfg.scene.spec_path = r.optional_path("scene.spec_path");
  cfg.scene.obj_dir = r.optional_path("scene.obj_dir");

  cfg.sampling.density = r.number("sampling.density");
  cfg.sampling.seed = r.seed("sampling.seed");

  auto& fp = cfg.floorplan;
  fp.half_band = r.number("floorplan.half_band");
  fp.resolution = r.number("floorplan.resolution");
  fp.min_hits = static_cast<int>(r.integer("floorplan.min_hits"));
  fp.min_segment_length = r.number("floorplan.min_segment_length");
  fp.simplify_tolerance_cells = r.number("floorplan.simplify_tolerance_cells");
  fp.merge_angle_deg = r.number("floorplan.merge_angle_deg");
  fp.merge_gap_cells = r.number("floorplan.merge_gap_cells");
  fp.closing_radius = static_cast<int>(r.integer("floorplan.closing_radius"));
  fp.min_hole_area = r.number("floorplan.min_hole_area");

  auto& cam = cfg.camera;
  cam.fx = r.number("camera.fx");
  cam.fy = r.number("camera.fy");
  cam.cx = r.number("camera.cx");
  cam.cy = r.number("camera.cy");
  cam.width = static_cast<int>(r.integer("camera.width"));
  cam.height = static_cast<int>(r.integer("camera.height"));
  cam.mount = r.string("camera.mount");

  const json& wp = r.at("trajectory.waypoints");
  if (!wp.is_array()) config_fail("config key 'trajectory.waypoints' must be an array of [x, y]");
  cfg.trajectory.waypoints.clear();
  for (const auto& p : wp) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      config_fail("config key 'trajectory.waypoints' must be an array of [x, y]");
    }
    cfg.trajectory.waypoints.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  cfg.trajectory.frames = static_cast<int>(r.integer("trajectory.frames"));
  cfg.trajectory.height = r.number("trajectory.height");

  cfg.simulator.pattern_rows = static_cast<int>(r.integer("simulator.pattern_rows"));
  cfg.simulator.pattern_cols = static_cast<int>(r.integer("simulator.pattern_cols"));
  auto& cp = cfg.simulator.correspondences;
  cp.per_pair = static_cast<int>(r.integer("simulator.per_pair"));
  cp.pixel_noise_sigma = r.number("simulator.pixel_noise_sigma");
  cp.window = static_cast<int>(r.integer("simulator.window"));
  cp.seed = r.seed("simulator.seed");
  cp.attempts_per_match = static_cast<int>(r.integer("simulator.attempts_per_match"));
  cp.occlusion_tolerance = r.number("simulator.occlusion_tolerance");

  cfg.drift.config.sigma_t = r.number("drift.sigma_t");
  cfg.drift.config.sigma_pitch = r.number("drift.sigma_pitch");
  cfg.drift.config.sigma_yaw = r.number("drift.sigma_yaw");
  cfg.drift.config.seed = r.seed("drift.seed");
  cfg.drift.target_ate_pos = r.optional_number("drift.target_ate_pos");
  cfg.drift.target_ate_rot = r.optional_number("drift.target_ate_rot");

  const std::string space = r.string("depth.interp_space");
  if (space == "depth") {
    cfg.depth.interp_space = InterpSpace::depth;
  } else if (space == "inverse_depth") {
    cfg.depth.interp_space = InterpSpace::inverse_depth;
  } else {
    config_fail("config key 'depth.interp_space' must be 'depth' or 'inverse_depth'");
  }
  cfg.depth.smooth = r.boolean("depth.smooth");
  cfg.depth.smooth_radius = static_cast<int>(r.integer("depth.smooth_radius"));
  cfg.depth.lift.lift_stride = static_cast<int>(r.integer("depth.lift_stride"));
  cfg.depth.lift.max_depth_jump = r.number("depth.max_depth_jump");
  cfg.depth.lift.max_bend = r.number("depth.max_bend");

  for (Term t : kAllTerms) {
    const std::string base = "terms." + std::string(term_name(t));
    cfg.terms[t].enabled = r.boolean(base + ".enabled");
    cfg.terms[t].weight = r.number(base + ".weight");
    cfg.terms[t].huber_delta = r.number(base + ".huber_delta");
  }
  cfg.terms.assoc_gate = r.number("terms.assoc_gate");

  auto& so = cfg.solver;
  so.max_outer_iters = static_cast<int>(r.integer("solver.max_outer_iters"));
  so.rel_cost_tol = r.number("solver.rel_cost_tol");
  so.lm_lambda_init = r.number("solver.lm_lambda_init");
  so.lm_lambda_factor = r.number("solver.lm_lambda_factor");
  so.max_consecutive_rejects = static_cast<int>(r.integer("solver.max_consecutive_rejects"));
  const std::string fix = r.string("solver.fix_first_pose");
  if (fix == "auto") {
    so.fix_first_pose = FixFirstPose::automatic;
  } else if (fix == "on") {
    so.fix_first_pose = FixFirstPose::on;
  } else if (fix == "off") {
    so.fix_first_pose = FixFirstPose::off;
  } else {
    config_fail("config key 'solver.fix_first_pose' must be 'auto', 'on' or 'off'");
  }
  so.translation_only = r.boolean("solver.translation_only");

  cfg.metrics.neighborhood.radius = r.number("metrics.radius");
  const long long mn = r.integer("metrics.min_neighbors");
  if (mn < 0) config_fail("config key 'metrics.min_neighbors' must be >= 0");
  cfg.metrics.neighborhood.min_neighbors = static_cast<std::size_t>(mn);
  const std::string mode = r.string("metrics.nnd_mode");
  if (mode == "to_reference") {
    cfg.metrics.nnd_mode = NndMode::to_reference;
  } else if (mode == "within_cloud") {
    cfg.metrics.nnd_mode = NndMode::within_cloud;
  } else {
    config_fail("config key 'metrics.nnd_mode' must be 'to_reference' or 'within_cloud'");
  }
  cfg.metrics.map_stride = static_cast<int>(r.integer("metrics.map_stride"));
  cfg.metrics.reference_stride = static_cast<int>(r.integer("metrics.reference_stride"));

  const json& rows = r.at("ablation.rows");
  if (!rows.is_array()) config_fail("config key 'ablation.rows' must be an array of term lists");
  cfg.ablation_rows.clear();
  for (const auto& row : rows) {
    if (!row.is_string()) config_fail("config key 'ablation.rows' entries must be strings such as \"G,F,W\"");
    cfg.ablation_rows.push_back(parse_term_list(row.get<std::string>()));
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
  json tree = to_json(PipelineConfig{});
  if (path) {
    json user;
    try {
      user = json::parse(io::read_text(*path));
    } catch (const json::parse_error& e) {
      config_fail(path->string() + ": invalid JSON: " + e.what());
    }
    merge(tree, user, "");
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) config_fail("override '" + ov + "' must look like key.path=value");
    const std::string key = ov.substr(0, eq);
    const std::string text = ov.substr(eq + 1);
    json* node = &tree;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) config_fail("unknown config key '" + key + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (node->is_object()) config_fail("config key '" + key + "' is a section, not a scalar");
    if (node->is_string()) {
      *node = text;
      continue;
    }
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    *node = value;
  }
  return from_json(tree);
}

}  // namespace bimcap::pipeline
