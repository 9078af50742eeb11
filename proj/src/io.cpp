#include "bimcap/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "bimcap/error.hpp"
#include "format_util.hpp"

namespace bimcap::io {
namespace {

using detail::fmt_double;
using detail::fmt_fixed;
using detail::fmt_float;
using detail::parse_double;
using detail::parse_int;
using detail::split;
using detail::split_whitespace;
using detail::trim;
using json = nlohmann::json;

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse, source + ":" + std::to_string(line) + ": " + what);
}

double field_double(std::string_view s, const std::string& source, std::size_t line, const char* name) {
  double v = 0.0;
  if (!parse_double(s, v) || !std::isfinite(v)) {
    parse_fail(source, line, std::string("bad ") + name + " '" + std::string(s) + "'");
  }
  return v;
}

// PLY coordinates are float32; parsing at that precision makes write/read round trips exact.
double field_float(std::string_view s, const std::string& source, std::size_t line, const char* name) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  float v = 0.0f;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    parse_fail(source, line, std::string("bad ") + name + " '" + std::string(s) + "'");
  }
  return static_cast<double>(v);
}

int field_int(std::string_view s, const std::string& source, std::size_t line, const char* name) {
  long long v = 0;
  if (!parse_int(s, v) || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    parse_fail(source, line, std::string("bad ") + name + " '" + std::string(s) + "'");
  }
  return static_cast<int>(v);
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, source + ": invalid JSON: " + e.what());
  }
}

template <typename T>
T json_get(const json& j, const char* key, const std::string& source) {
  if (!j.contains(key)) throw Error(ErrorCode::parse, source + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::parse, source + ": key '" + key + "' has the wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& source,
                const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::parse, source + ": " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw Error(ErrorCode::parse, source + ": unknown key '" + where + key + "'");
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
  return v;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::io, "failed reading " + path.string());
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::io, "cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Trajectory parse_tum(const std::string& text, const std::string& source) {
  Trajectory traj;
  const auto lines = lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_whitespace(line);
    if (f.size() != 8) parse_fail(source, ln + 1, "expected 8 fields, got " + std::to_string(f.size()));
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = field_double(f[k], source, ln + 1, "number");
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (!(norm > 1e-6)) parse_fail(source, ln + 1, "zero quaternion");
    if (std::abs(norm - 1.0) > 1e-9) q.normalize();
    TimedPose tp;
    tp.timestamp = v[0];
    tp.pose.rotation = q;
    tp.pose.translation = Vec3(v[1], v[2], v[3]);
    traj.poses.push_back(tp);
  }
  return traj;
}

std::string format_tum(const Trajectory& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& tp : traj.poses) {
    const auto& t = tp.pose.translation;
    const auto& q = tp.pose.rotation;
    out += fmt_double(tp.timestamp) + ' ' + fmt_double(t.x()) + ' ' + fmt_double(t.y()) + ' ' + fmt_double(t.z()) +
           ' ' + fmt_double(q.x()) + ' ' + fmt_double(q.y()) + ' ' + fmt_double(q.z()) + ' ' + fmt_double(q.w()) +
           '\n';
  }
  return out;
}

Trajectory read_tum(const fs::path& path) { return parse_tum(read_text(path), path.string()); }

void write_tum(const fs::path& path, const Trajectory& traj) { write_text(path, format_tum(traj)); }

SemanticPointCloud parse_ply(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "ply") parse_fail(source, 1, "missing 'ply' magic");
  std::size_t count = 0;
  bool have_count = false;
  std::vector<std::string> props;
  std::size_t ln = 1;
  for (; ln < lines.size(); ++ln) {
    const auto f = split_whitespace(trim(lines[ln]));
    if (f.empty()) continue;
    if (f[0] == "end_header") break;
    if (f[0] == "format") {
      if (f.size() < 2 || f[1] != "ascii") parse_fail(source, ln + 1, "only ascii PLY is supported");
    } else if (f[0] == "element") {
      if (f.size() != 3) parse_fail(source, ln + 1, "bad element line");
      if (f[1] != "vertex") parse_fail(source, ln + 1, "unsupported element '" + std::string(f[1]) + "'");
      long long n = 0;
      if (!parse_int(f[2], n) || n < 0) parse_fail(source, ln + 1, "bad vertex count");
      count = static_cast<std::size_t>(n);
      have_count = true;
    } else if (f[0] == "property") {
      if (f.size() != 3) parse_fail(source, ln + 1, "bad property line");
      props.emplace_back(f[2]);
    }
  }
  if (ln >= lines.size()) parse_fail(source, ln, "missing end_header");
  if (!have_count) parse_fail(source, ln, "missing vertex element");
  int ix = -1;
  int iy = -1;
  int iz = -1;
  int ic = -1;
  for (std::size_t k = 0; k < props.size(); ++k) {
    if (props[k] == "x") ix = static_cast<int>(k);
    if (props[k] == "y") iy = static_cast<int>(k);
    if (props[k] == "z") iz = static_cast<int>(k);
    if (props[k] == "class") ic = static_cast<int>(k);
  }
  if (ix < 0 || iy < 0 || iz < 0) parse_fail(source, ln, "PLY needs x, y, z properties");
  SemanticPointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t row = ln + 1 + k;
    if (row >= lines.size()) parse_fail(source, row, "fewer vertices than declared");
    const auto f = split_whitespace(trim(lines[row]));
    if (f.size() != props.size()) parse_fail(source, row + 1, "wrong number of vertex fields");
    LabeledPoint p;
    p.position = Vec3(field_float(f[ix], source, row + 1, "x"), field_float(f[iy], source, row + 1, "y"),
                      field_float(f[iz], source, row + 1, "z"));
    if (ic >= 0) {
      const auto cls = class_from_index(field_int(f[ic], source, row + 1, "class"));
      if (!cls) parse_fail(source, row + 1, "class index out of range");
      p.cls = *cls;
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

std::string format_ply(const SemanticPointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar class\nend_header\n";
  out.reserve(out.size() + cloud.size() * 32);
  for (const auto& p : cloud.points) {
    out += fmt_float(static_cast<float>(p.position.x())) + ' ' + fmt_float(static_cast<float>(p.position.y())) + ' ' +
           fmt_float(static_cast<float>(p.position.z())) + ' ' + std::to_string(static_cast<int>(p.cls)) + '\n';
  }
  return out;
}

SemanticPointCloud read_ply(const fs::path& path) { return parse_ply(read_text(path), path.string()); }

void write_ply(const fs::path& path, const SemanticPointCloud& cloud) { write_text(path, format_ply(cloud)); }

std::vector<DepthSample> parse_frame_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "u,v,depth,class") parse_fail(source, 1, "expected header u,v,depth,class");
  std::vector<DepthSample> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) parse_fail(source, ln + 1, "expected 4 columns");
    DepthSample s;
    s.u = field_double(f[0], source, ln + 1, "u");
    s.v = field_double(f[1], source, ln + 1, "v");
    s.depth = field_double(f[2], source, ln + 1, "depth");
    if (!(s.depth > 0.0)) parse_fail(source, ln + 1, "depth must be positive");
    const auto name = trim(f[3]);
    if (auto cls = parse_class(name)) {
      s.cls = *cls;
    } else {
      long long idx = 0;
      const auto by_index = parse_int(name, idx) ? class_from_index(static_cast<int>(idx)) : std::nullopt;
      if (!by_index) parse_fail(source, ln + 1, "unknown class '" + std::string(name) + "'");
      s.cls = *by_index;
    }
    out.push_back(s);
  }
  return out;
}

std::string format_frame_csv(const Frame& frame) {
  std::string out = "u,v,depth,class\n";
  for (const auto& s : frame.samples) {
    out += fmt_double(s.u) + ',' + fmt_double(s.v) + ',' + fmt_double(s.depth) + ',' + std::string(class_name(s.cls)) +
           '\n';
  }
  return out;
}

void write_frames(const fs::path& dir, const std::vector<Frame>& frames) {
  json manifest = json::object();
  for (const auto& f : frames) {
    write_text(dir / ("frame_" + std::to_string(f.id) + ".csv"), format_frame_csv(f));
    manifest[std::to_string(f.id)] = f.timestamp;
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Frame> read_frames(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const json manifest = parse_json(read_text(manifest_path), manifest_path.string());
  if (!manifest.is_object()) throw Error(ErrorCode::parse, manifest_path.string() + ": manifest must be an object");
  std::vector<Frame> frames;
  for (const auto& [key, value] : manifest.items()) {
    Frame f;
    f.id = field_int(key, manifest_path.string(), 0, "frame id");
    if (!value.is_number()) throw Error(ErrorCode::parse, manifest_path.string() + ": timestamp of " + key);
    f.timestamp = value.get<double>();
    const fs::path csv = dir / ("frame_" + key + ".csv");
    f.samples = parse_frame_csv(read_text(csv), csv.string());
    frames.push_back(std::move(f));
  }
  std::sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) {
    return a.timestamp < b.timestamp || (a.timestamp == b.timestamp && a.id < b.id);
  });
  return frames;
}

std::vector<Correspondence> parse_correspondences(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "frame_i,u_i,v_i,frame_j,u_j,v_j") {
    parse_fail(source, 1, "expected header frame_i,u_i,v_i,frame_j,u_j,v_j");
  }
  std::vector<Correspondence> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto line = trim(lines[ln]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) parse_fail(source, ln + 1, "expected 6 columns");
    Correspondence c;
    c.frame_i = field_int(f[0], source, ln + 1, "frame_i");
    c.u_i = field_double(f[1], source, ln + 1, "u_i");
    c.v_i = field_double(f[2], source, ln + 1, "v_i");
    c.frame_j = field_int(f[3], source, ln + 1, "frame_j");
    c.u_j = field_double(f[4], source, ln + 1, "u_j");
    c.v_j = field_double(f[5], source, ln + 1, "v_j");
    if (c.frame_i == c.frame_j) parse_fail(source, ln + 1, "frame_i equals frame_j");
    out.push_back(c);
  }
  return out;
}

std::string format_correspondences(const std::vector<Correspondence>& corr) {
  std::string out = "frame_i,u_i,v_i,frame_j,u_j,v_j\n";
  for (const auto& c : corr) {
    out += std::to_string(c.frame_i) + ',' + fmt_double(c.u_i) + ',' + fmt_double(c.v_i) + ',' +
           std::to_string(c.frame_j) + ',' + fmt_double(c.u_j) + ',' + fmt_double(c.v_j) + '\n';
  }
  return out;
}

std::vector<Correspondence> read_correspondences(const fs::path& path) {
  return parse_correspondences(read_text(path), path.string());
}

void write_correspondences(const fs::path& path, const std::vector<Correspondence>& corr) {
  write_text(path, format_correspondences(corr));
}

std::string encode_depth(const DepthMap& dm) {
  std::string out;
  out.reserve(8 + dm.depth.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(dm.width));
  put_u32(out, static_cast<std::uint32_t>(dm.height));
  for (double d : dm.depth) {
    const float f = std::isfinite(d) && d > 0.0 ? static_cast<float>(d) : std::numeric_limits<float>::quiet_NaN();
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

DepthMap decode_depth(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 8) throw Error(ErrorCode::parse, source + ": depth file shorter than its header");
  const std::uint32_t w = get_u32(bytes, 0);
  const std::uint32_t h = get_u32(bytes, 4);
  if (w == 0 || h == 0 || w > 65535 || h > 65535) throw Error(ErrorCode::parse, source + ": bad depth dimensions");
  if (bytes.size() != 8 + static_cast<std::size_t>(w) * h * 4) {
    throw Error(ErrorCode::parse, source + ": depth payload size does not match the header");
  }
  DepthMap dm(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t k = 0; k < dm.depth.size(); ++k) {
    const float f = std::bit_cast<float>(get_u32(bytes, 8 + 4 * k));
    dm.depth[k] = std::isfinite(f) && f > 0.0f ? static_cast<double>(f) : std::numeric_limits<double>::quiet_NaN();
  }
  return dm;
}

void write_depth(const fs::path& path, const DepthMap& dm) { write_text(path, encode_depth(dm)); }

DepthMap read_depth(const fs::path& path) { return decode_depth(read_text(path), path.string()); }

std::string format_plan(const VectorFloorPlan& plan) {
  std::string out = "{\n  \"segments\": [";
  for (std::size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& s = plan.segments[k];
    out += k == 0 ? "\n" : ",\n";
    out += "    {\"class\": \"" + std::string(class_name(s.cls)) + "\", \"x1\": " + fmt_fixed(s.start.x(), 6) +
           ", \"y1\": " + fmt_fixed(s.start.y(), 6) + ", \"x2\": " + fmt_fixed(s.end.x(), 6) +
           ", \"y2\": " + fmt_fixed(s.end.y(), 6) + "}";
  }
  out += plan.segments.empty() ? "],\n" : "\n  ],\n";
  out += "  \"floor_z\": " + fmt_fixed(plan.floor.offset, 6) + ",\n";
  out += "  \"ceiling_z\": " + fmt_fixed(plan.ceiling.offset, 6) + "\n}\n";
  return out;
}

VectorFloorPlan parse_plan(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  check_keys(j, {"segments", "floor_z", "ceiling_z"}, source, "");
  VectorFloorPlan plan;
  plan.floor = Plane::horizontal(json_get<double>(j, "floor_z", source));
  plan.ceiling = Plane::horizontal(json_get<double>(j, "ceiling_z", source));
  const auto segs = json_get<json>(j, "segments", source);
  if (!segs.is_array()) throw Error(ErrorCode::parse, source + ": segments must be an array");
  for (const auto& s : segs) {
    check_keys(s, {"class", "x1", "y1", "x2", "y2"}, source, "segments.");
    const auto name = json_get<std::string>(s, "class", source);
    const auto cls = parse_class(name);
    if (!cls || (*cls != SemanticClass::wall && *cls != SemanticClass::column)) {
      throw Error(ErrorCode::parse, source + ": segment class must be wall or column, got '" + name + "'");
    }
    Segment2D seg{Vec2(json_get<double>(s, "x1", source), json_get<double>(s, "y1", source)),
                  Vec2(json_get<double>(s, "x2", source), json_get<double>(s, "y2", source)), *cls};
    if (!(seg.length() > 1e-6)) throw Error(ErrorCode::parse, source + ": zero-length segment");
    plan.segments.push_back(seg);
  }
  return plan;
}

void write_plan(const fs::path& path, const VectorFloorPlan& plan) { write_text(path, format_plan(plan)); }

VectorFloorPlan read_plan(const fs::path& path) { return parse_plan(read_text(path), path.string()); }

std::string format_pgm(const OccupancyRaster& raster) {
  std::string out = "P2\n" + std::to_string(raster.cols) + ' ' + std::to_string(raster.rows) + "\n255\n";
  for (int iy = raster.rows - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < raster.cols; ++ix) {
      if (ix > 0) out += ' ';
      out += raster.occupied(ix, iy) ? "255" : "0";
    }
    out += '\n';
  }
  return out;
}

SceneSpec parse_scene_spec(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  check_keys(j, {"rooms", "wall_thickness", "floor_z", "ceiling_z", "columns", "doors"}, source, "");
  SceneSpec spec;
  const auto rooms = json_get<json>(j, "rooms", source);
  if (!rooms.is_array()) throw Error(ErrorCode::parse, source + ": rooms must be an array");
  for (const auto& r : rooms) {
    check_keys(r, {"x", "y", "w", "h"}, source, "rooms.");
    spec.rooms.push_back({json_get<double>(r, "x", source), json_get<double>(r, "y", source),
                          json_get<double>(r, "w", source), json_get<double>(r, "h", source)});
  }
  if (j.contains("wall_thickness")) spec.wall_thickness = json_get<double>(j, "wall_thickness", source);
  if (j.contains("floor_z")) spec.floor_z = json_get<double>(j, "floor_z", source);
  if (j.contains("ceiling_z")) spec.ceiling_z = json_get<double>(j, "ceiling_z", source);
  if (j.contains("columns")) {
    for (const auto& c : json_get<json>(j, "columns", source)) {
      check_keys(c, {"x", "y", "size"}, source, "columns.");
      spec.columns.push_back({json_get<double>(c, "x", source), json_get<double>(c, "y", source),
                              json_get<double>(c, "size", source)});
    }
  }
  if (j.contains("doors")) {
    for (const auto& d : json_get<json>(j, "doors", source)) {
      check_keys(d, {"x", "y", "width"}, source, "doors.");
      spec.doors.push_back({json_get<double>(d, "x", source), json_get<double>(d, "y", source),
                            json_get<double>(d, "width", source)});
    }
  }
  return spec;
}

std::string format_scene_spec(const SceneSpec& spec) {
  json j;
  j["rooms"] = json::array();
  for (const auto& r : spec.rooms) j["rooms"].push_back({{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}});
  j["wall_thickness"] = spec.wall_thickness;
  j["floor_z"] = spec.floor_z;
  j["ceiling_z"] = spec.ceiling_z;
  j["columns"] = json::array();
  for (const auto& c : spec.columns) j["columns"].push_back({{"x", c.x}, {"y", c.y}, {"size", c.size}});
  j["doors"] = json::array();
  for (const auto& d : spec.doors) j["doors"].push_back({{"x", d.x}, {"y", d.y}, {"width", d.width}});
  return j.dump(2) + "\n";
}

SceneSpec read_scene_spec(const fs::path& path) { return parse_scene_spec(read_text(path), path.string()); }

std::string format_solve_report(const SolveReport& report) {
  json j;
  j["iterations"] = report.iterations;
  j["initial_cost"] = report.initial_cost;
  j["final_cost"] = report.final_cost;
  j["termination"] = std::string(termination_name(report.termination));
  j["dropped_correspondences"] = report.dropped_correspondences;
  json active = json::object();
  for (Term t : kAllTerms) active[std::string(term_name(t))] = report.active_residuals[static_cast<std::size_t>(t)];
  j["active_residuals"] = active;
  json iter = json::array();
  json cost = json::array();
  json lambda = json::array();
  json ate_pos = json::array();
  json ate_rot = json::array();
  for (const auto& r : report.history) {
    iter.push_back(r.iteration);
    cost.push_back(r.cost);
    lambda.push_back(r.lambda);
    ate_pos.push_back(optional_number(r.ate_pos));
    ate_rot.push_back(optional_number(r.ate_rot));
  }
  j["history"] = {{"iteration", iter}, {"cost", cost}, {"lambda", lambda}, {"ate_pos", ate_pos}, {"ate_rot", ate_rot}};
  return j.dump(2) + "\n";
}

SolveReport parse_solve_report(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  SolveReport r;
  r.iterations = json_get<int>(j, "iterations", source);
  r.initial_cost = json_get<double>(j, "initial_cost", source);
  r.final_cost = json_get<double>(j, "final_cost", source);
  const auto term = json_get<std::string>(j, "termination", source);
  if (term == "converged") {
    r.termination = Termination::converged;
  } else if (term == "max_iters") {
    r.termination = Termination::max_iters;
  } else if (term == "stalled") {
    r.termination = Termination::stalled;
  } else {
    throw Error(ErrorCode::parse, source + ": unknown termination '" + term + "'");
  }
  if (j.contains("dropped_correspondences")) {
    r.dropped_correspondences = json_get<std::size_t>(j, "dropped_correspondences", source);
  }
  if (j.contains("active_residuals")) {
    const auto active = json_get<json>(j, "active_residuals", source);
    for (Term t : kAllTerms) {
      const std::string name(term_name(t));
      if (active.contains(name)) {
        r.active_residuals[static_cast<std::size_t>(t)] = json_get<std::size_t>(active, name.c_str(), source);
      }
    }
  }
  const auto h = json_get<json>(j, "history", source);
  const auto iter = json_get<json>(h, "iteration", source);
  const auto cost = json_get<json>(h, "cost", source);
  const auto ate_pos = h.value("ate_pos", json::array());
  const auto ate_rot = h.value("ate_rot", json::array());
  const auto lambda = h.value("lambda", json::array());
  if (!iter.is_array() || !cost.is_array() || iter.size() != cost.size()) {
    throw Error(ErrorCode::parse, source + ": history arrays must have equal length");
  }
  for (std::size_t k = 0; k < iter.size(); ++k) {
    IterationRecord rec;
    rec.iteration = iter[k].get<int>();
    rec.cost = cost[k].get<double>();
    if (k < lambda.size() && lambda[k].is_number()) rec.lambda = lambda[k].get<double>();
    if (k < ate_pos.size() && ate_pos[k].is_number()) rec.ate_pos = ate_pos[k].get<double>();
    if (k < ate_rot.size() && ate_rot[k].is_number()) rec.ate_rot = ate_rot[k].get<double>();
    r.history.push_back(rec);
  }
  return r;
}

std::string format_metrics_json(const MetricsReport& report) {
  json j;
  j["ate_pos"] = report.ate.ate_pos;
  j["ate_rot"] = report.ate.ate_rot;
  j["rmse_yaw"] = report.ate.rmse_yaw;
  j["rmse_pitch"] = report.ate.rmse_pitch;
  j["rmse_roll"] = report.ate.rmse_roll;
  j["matched_poses"] = report.ate.matched;
  j["unmatched_poses"] = report.ate.unmatched;
  j["mme"] = report.mme;
  j["mpv"] = report.mpv;
  j["nnd"] = report.nnd;
  j["map_points"] = report.map_points;
  j["reference_points"] = report.reference_points;
  j["mme_skipped"] = report.mme_skipped;
  j["mpv_skipped"] = report.mpv_skipped;
  return j.dump(2) + "\n";
}

std::string metrics_csv_header() { return "ATE_pos,ATE_rot,RMSE_yaw,RMSE_pitch,RMSE_roll,MME,MPV,NND"; }

std::string format_metrics_csv_row(const MetricsReport& report) {
  return fmt_fixed(report.ate.ate_pos, 6) + ',' + fmt_fixed(report.ate.ate_rot, 6) + ',' +
         fmt_fixed(report.ate.rmse_yaw, 6) + ',' + fmt_fixed(report.ate.rmse_pitch, 6) + ',' +
         fmt_fixed(report.ate.rmse_roll, 6) + ',' + fmt_fixed(report.mme, 6) + ',' + fmt_fixed(report.mpv, 6) + ',' +
         fmt_fixed(report.nnd, 6);
}

}  // namespace bimcap::io
