#include "bimcap/pipeline/stages.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>

#include "bimcap/error.hpp"
#include "bimcap/io.hpp"
#include "bimcap/parallel.hpp"
#include "format_util.hpp"

namespace bimcap::pipeline {
namespace {

using json = nlohmann::json;

constexpr double kMaxFrameDt = 0.05;

void require_file(const fs::path& p, const char* stage_hint) {
  std::error_code ec;
  if (!fs::exists(p, ec)) {
    throw Error(ErrorCode::io, "missing input " + p.string() + " (run the '" + stage_hint + "' stage first)");
  }
}

BuildingScene load_stage_scene(const Layout& lay) {
  require_file(lay.scene_dir, "scene");
  return ingest_obj_directory(lay.scene_dir);
}

struct OptimizeInputs {
  CameraModel cam;
  std::vector<Frame> frames;
  std::vector<DepthMap> depth;
  std::vector<Correspondence> correspondences;
  VectorFloorPlan plan;
};

std::vector<DepthMap> load_depth_maps(const Layout& lay, const std::vector<Frame>& frames, const CameraModel& cam) {
  std::vector<DepthMap> depth(frames.size());
  for (const auto& f : frames) require_file(lay.depth_file(f.id), "densify");
  parallel_for(frames.size(), [&](std::size_t k) {
    DepthMap dm = io::read_depth(lay.depth_file(frames[k].id));
    if (dm.width != cam.width || dm.height != cam.height) {
      throw Error(ErrorCode::invalid_argument, "depth map " + lay.depth_file(frames[k].id).string() +
                                                   " does not match the camera size");
    }
    assign_nearest_classes(dm, frames[k]);
    depth[k] = std::move(dm);
  });
  return depth;
}

OptimizeInputs load_optimize_inputs(const PipelineConfig& cfg, const Layout& lay) {
  OptimizeInputs in;
  in.cam = cfg.camera.model();
  require_file(lay.frames_dir, "simulate");
  in.frames = io::read_frames(lay.frames_dir);
  in.depth = load_depth_maps(lay, in.frames, in.cam);
  require_file(lay.correspondences_csv, "simulate");
  in.correspondences = io::read_correspondences(lay.correspondences_csv);
  require_file(lay.plan_json, "floorplan");
  in.plan = io::read_plan(lay.plan_json);
  return in;
}

std::string svg_num(double v) { return detail::fmt_fixed(v, 2); }

}  // namespace

Layout::Layout(const fs::path& out)
    : root(out),
      scene_dir(out / "scene"),
      scene_summary(out / "scene_summary.json"),
      reference_ply(out / "reference.ply"),
      plan_json(out / "plan.json"),
      frames_dir(out / "frames"),
      correspondences_csv(out / "correspondences.csv"),
      gt_tum(out / "gt.tum"),
      drifted_tum(out / "drifted.tum"),
      depth_dir(out / "depth"),
      refined_tum(out / "refined.tum"),
      solve_report(out / "solve_report.json"),
      map_initial_ply(out / "map_initial.ply"),
      map_refined_ply(out / "map_refined.ply"),
      metrics_json(out / "metrics.json"),
      metrics_csv(out / "metrics.csv"),
      ablation_csv(out / "ablation.csv"),
      plot_svg(out / "ate.svg") {}

fs::path Layout::raster_pgm(SemanticClass cls) const {
  return root / ("raster_" + std::string(class_name(cls)) + ".pgm");
}

fs::path Layout::depth_file(int frame_id) const { return depth_dir / ("frame_" + std::to_string(frame_id) + ".depth"); }

BuildingScene load_scene_source(const SceneSource& source) {
  if (source.obj_dir) return ingest_obj_directory(*source.obj_dir);
  if (source.spec_path) return generate_scene(io::read_scene_spec(*source.spec_path));
  return generate_scene(source.spec);
}

std::vector<Frame> render_frames(const SceneRaycaster& caster, const CameraModel& cam, const Trajectory& traj,
                                 int pattern_rows, int pattern_cols) {
  const auto pattern = scanline_pattern(cam, pattern_rows, pattern_cols);
  std::vector<Frame> frames(traj.size());
  parallel_for(traj.size(), [&](std::size_t k) {
    frames[k] = raycast_depth(caster, cam, traj.poses[k].pose, pattern, static_cast<int>(k), traj.poses[k].timestamp);
  });
  return frames;
}

DepthMap densify_frame(const Frame& frame, const CameraModel& cam, const DepthConfig& cfg) {
  DepthMap dm = densify_linear(frame, cam, cfg.interp_space);
  if (cfg.smooth) dm = smooth_planar_regions(dm, {SemanticClass::floor, SemanticClass::ceiling}, cfg.smooth_radius);
  return dm;
}

std::vector<DepthMap> densify_frames(const std::vector<Frame>& frames, const CameraModel& cam,
                                     const DepthConfig& cfg) {
  std::vector<DepthMap> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t k) { out[k] = densify_frame(frames[k], cam, cfg); });
  return out;
}

std::vector<Pose> poses_for_frames(const std::vector<Frame>& frames, const Trajectory& traj) {
  std::vector<Pose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const TimedPose* best = nullptr;
    double best_dt = kMaxFrameDt;
    for (const auto& tp : traj.poses) {
      const double dt = std::abs(tp.timestamp - f.timestamp);
      if (dt <= best_dt && (best == nullptr || dt < best_dt)) {
        best = &tp;
        best_dt = dt;
      }
    }
    if (best == nullptr) {
      throw Error(ErrorCode::association, "no trajectory pose within 0.05 s of frame " + std::to_string(f.id));
    }
    out.push_back(best->pose);
  }
  return out;
}

Trajectory trajectory_for_frames(const std::vector<Frame>& frames, const std::vector<Pose>& poses) {
  Trajectory traj;
  for (std::size_t k = 0; k < frames.size(); ++k) traj.poses.push_back({frames[k].timestamp, poses[k]});
  return traj;
}

SemanticPointCloud fuse_map(const std::vector<DepthMap>& depth, const CameraModel& cam, const std::vector<Pose>& poses,
                            int stride) {
  if (depth.size() != poses.size()) throw Error(ErrorCode::invalid_argument, "depth and pose counts differ");
  ClassSet all;
  for (SemanticClass c : kAllSemanticClasses) all.insert(c);
  std::vector<SemanticPointCloud> parts(depth.size());
  parallel_for(depth.size(), [&](std::size_t k) { parts[k] = lift_labeled_points(depth[k], cam, poses[k], all, stride); });
  SemanticPointCloud out;
  for (auto& p : parts) out.points.insert(out.points.end(), p.points.begin(), p.points.end());
  return out;
}

SemanticPointCloud thin_cloud(const SemanticPointCloud& cloud, int stride) {
  if (stride < 1) throw Error(ErrorCode::invalid_argument, "thinning stride must be >= 1");
  SemanticPointCloud out;
  for (std::size_t k = 0; k < cloud.size(); k += static_cast<std::size_t>(stride)) out.points.push_back(cloud.points[k]);
  return out;
}

MetricsReport evaluate_metrics(const Trajectory& est, const Trajectory& gt, const SemanticPointCloud& map,
                               const SemanticPointCloud& reference, const MetricsConfig& cfg) {
  MetricsReport rep;
  rep.ate = ate(est, gt);
  const auto map_pts = map.positions();
  const auto ref_pts = reference.positions();
  rep.map_points = map_pts.size();
  rep.reference_points = ref_pts.size();
  const auto m = mme(map_pts, ref_pts, cfg.neighborhood);
  rep.mme = m.value;
  rep.mme_skipped = m.skipped;
  const auto p = mpv(map_pts, cfg.neighborhood);
  rep.mpv = p.value;
  rep.mpv_skipped = p.skipped;
  rep.nnd = nnd(map_pts, ref_pts, cfg.nnd_mode);
  return rep;
}

DriftConfig resolve_drift(const Trajectory& gt, const DriftSettings& settings) {
  if (settings.target_ate_pos && settings.target_ate_rot) {
    return calibrate_sigma(gt, *settings.target_ate_pos, *settings.target_ate_rot, settings.config.seed);
  }
  return settings.config;
}

std::string ablation_csv_header() { return "G,F,W,Co,Ce,MME,MPV,NND,ATE_pos,ATE_rot"; }

std::string format_ablation_row(const AblationRow& row) {
  std::string out;
  for (Term t : kAllTerms) {
    out += std::find(row.terms.begin(), row.terms.end(), t) != row.terms.end() ? "1," : "0,";
  }
  const auto& m = row.metrics;
  out += detail::fmt_fixed(m.mme, 6) + ',' + detail::fmt_fixed(m.mpv, 6) + ',' + detail::fmt_fixed(m.nnd, 6) + ',' +
         detail::fmt_fixed(m.ate.ate_pos, 6) + ',' + detail::fmt_fixed(m.ate.ate_rot, 6);
  return out;
}

std::string render_plot_svg(const std::vector<SolveReport>& reports, const std::vector<std::string>& labels) {
  if (reports.empty()) throw Error(ErrorCode::invalid_argument, "plot needs at least one report");
  const bool have_ate = std::all_of(reports.begin(), reports.end(), [](const SolveReport& r) {
    return std::all_of(r.history.begin(), r.history.end(), [](const IterationRecord& h) { return h.ate_pos && h.ate_rot; });
  });
  struct Panel {
    std::string title;
    std::function<double(const IterationRecord&)> value;
  };
  std::vector<Panel> panels;
  if (have_ate) {
    panels.push_back({"ATE_pos [m]", [](const IterationRecord& h) { return *h.ate_pos; }});
    panels.push_back({"ATE_rot [deg]", [](const IterationRecord& h) { return *h.ate_rot; }});
  } else {
    panels.push_back({"cost", [](const IterationRecord& h) { return h.cost; }});
  }
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  constexpr double kW = 420.0;
  constexpr double kH = 300.0;
  constexpr double kMargin = 50.0;
  const double total_w = kW * static_cast<double>(panels.size());
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(total_w) + "\" height=\"" +
                    svg_num(kH + 20.0 * static_cast<double>(reports.size())) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double x0 = kW * static_cast<double>(p) + kMargin;
    const double x1 = kW * static_cast<double>(p + 1) - 20.0;
    const double y0 = kH - kMargin;
    const double y1 = 30.0;
    int max_iter = 1;
    double vmax = 0.0;
    for (const auto& r : reports) {
      for (const auto& h : r.history) {
        max_iter = std::max(max_iter, h.iteration);
        vmax = std::max(vmax, panels[p].value(h));
      }
    }
    if (!(vmax > 0.0)) vmax = 1.0;
    svg += "<text x=\"" + svg_num((x0 + x1) / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
           panels[p].title + " vs iteration</text>\n";
    svg += "<line x1=\"" + svg_num(x0) + "\" y1=\"" + svg_num(y0) + "\" x2=\"" + svg_num(x1) + "\" y2=\"" +
           svg_num(y0) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + svg_num(x0) + "\" y1=\"" + svg_num(y0) + "\" x2=\"" + svg_num(x0) + "\" y2=\"" +
           svg_num(y1) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + svg_num(x0 - 4) + "\" y=\"" + svg_num(y1 + 4) + "\" text-anchor=\"end\" font-size=\"10\">" +
           detail::fmt_fixed(vmax, 3) + "</text>\n";
    svg += "<text x=\"" + svg_num(x0 - 4) + "\" y=\"" + svg_num(y0) + "\" text-anchor=\"end\" font-size=\"10\">0</text>\n";
    svg += "<text x=\"" + svg_num(x1) + "\" y=\"" + svg_num(y0 + 14) + "\" text-anchor=\"end\" font-size=\"10\">" +
           std::to_string(max_iter) + "</text>\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
      std::string pts;
      for (const auto& h : reports[r].history) {
        const double x = x0 + (x1 - x0) * h.iteration / max_iter;
        const double y = y0 - (y0 - y1) * panels[p].value(h) / vmax;
        if (!pts.empty()) pts += ' ';
        pts += svg_num(x) + ',' + svg_num(y);
      }
      svg += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(kColors[r % 7]) + "\" points=\"" +
             pts + "\"/>\n";
    }
  }
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const std::string label = r < labels.size() ? labels[r] : "run " + std::to_string(r + 1);
    const double y = kH + 20.0 * static_cast<double>(r);
    svg += "<rect x=\"" + svg_num(kMargin) + "\" y=\"" + svg_num(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
           kColors[r % 7] + "\"/>\n";
    svg += "<text x=\"" + svg_num(kMargin + 18) + "\" y=\"" + svg_num(y) + "\" font-size=\"12\">" + label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string stage_scene(const PipelineConfig& cfg) {
  const Layout lay(cfg.output_dir);
  const BuildingScene scene = load_scene_source(cfg.scene);
  scene.validate();
  std::error_code ec;
  fs::remove_all(lay.scene_dir, ec);
  export_obj_directory(scene, lay.scene_dir);
  std::map<std::string, int> per_class;
  for (const auto& m : scene.meshes) ++per_class[std::string(class_name(m.cls))];
  const auto [lo, hi] = scene.footprint_bounds();
  json j;
  j["entities"] = scene.meshes.size();
  j["triangles"] = scene.triangle_count();
  j["floor_z"] = scene.floor_z;
  j["ceiling_z"] = scene.ceiling_z;
  j["classes"] = per_class;
  j["bounds"] = {{"min", {lo.x(), lo.y()}}, {"max", {hi.x(), hi.y()}}};
  const std::string text = j.dump(2) + "\n";
  io::write_text(lay.scene_summary, text);
  return text;
}

void stage_sample(const PipelineConfig& cfg) {
  const Layout lay(cfg.output_dir);
  const BuildingScene scene = load_stage_scene(lay);
  io::write_ply(lay.reference_ply, sample_uniform(scene, cfg.sampling.density, cfg.sampling.seed));
}

void stage_floorplan(const PipelineConfig& cfg, const std::optional<fs::path>& ply, const std::optional<fs::path>& out) {
  const Layout lay(cfg.output_dir);
  const fs::path in = ply.value_or(lay.reference_ply);
  require_file(in, "sample");
  const SemanticPointCloud cloud = io::read_ply(in);
  double floor_z = 0.0;
  double ceiling_z = 0.0;
  std::error_code ec;
  if (fs::exists(lay.scene_summary, ec)) {
    const json s = json::parse(io::read_text(lay.scene_summary));
    floor_z = s.at("floor_z").get<double>();
    ceiling_z = s.at("ceiling_z").get<double>();
  } else {
    std::vector<double> fz;
    double zmax = -std::numeric_limits<double>::infinity();
    for (const auto& p : cloud.points) {
      if (p.cls == SemanticClass::floor) fz.push_back(p.position.z());
      zmax = std::max(zmax, p.position.z());
    }
    if (fz.empty()) throw Error(ErrorCode::empty_plan, "cloud has no floor points");
    std::nth_element(fz.begin(), fz.begin() + static_cast<std::ptrdiff_t>(fz.size() / 2), fz.end());
    floor_z = fz[fz.size() / 2];
    ceiling_z = zmax;
  }
  const auto result = build_floorplan_with_rasters(cloud, floor_z, ceiling_z, cfg.floorplan);
  io::write_plan(out.value_or(lay.plan_json), result.plan);
  io::write_text(lay.raster_pgm(SemanticClass::wall), io::format_pgm(result.wall_raster));
  io::write_text(lay.raster_pgm(SemanticClass::column), io::format_pgm(result.column_raster));
}

void stage_simulate(const PipelineConfig& cfg) {
  const Layout lay(cfg.output_dir);
  const BuildingScene scene = load_stage_scene(lay);
  const CameraModel cam = cfg.camera.model();
  const Trajectory gt =
      generate_gt_trajectory(scene, cfg.trajectory.waypoints, cfg.trajectory.frames, cfg.trajectory.height);
  const SceneRaycaster caster(scene);
  const auto frames = render_frames(caster, cam, gt, cfg.simulator.pattern_rows, cfg.simulator.pattern_cols);
  const auto corr = synth_correspondences(caster, cam, gt, cfg.simulator.correspondences);
  std::error_code ec;
  fs::remove_all(lay.frames_dir, ec);
  io::write_frames(lay.frames_dir, frames);
  io::write_correspondences(lay.correspondences_csv, corr);
  io::write_tum(lay.gt_tum, gt);
}

DriftConfig stage_drift(const PipelineConfig& cfg, const std::optional<fs::path>& in,
                        const std::optional<fs::path>& out) {
  const Layout lay(cfg.output_dir);
  const fs::path src = in.value_or(lay.gt_tum);
  require_file(src, "simulate");
  const Trajectory gt = io::read_tum(src);
  gt.validate();
  const DriftConfig dc = resolve_drift(gt, cfg.drift);
  io::write_tum(out.value_or(lay.drifted_tum), apply_drift(gt, dc));
  return dc;
}

void stage_densify(const PipelineConfig& cfg) {
  const Layout lay(cfg.output_dir);
  require_file(lay.frames_dir, "simulate");
  const auto frames = io::read_frames(lay.frames_dir);
  const CameraModel cam = cfg.camera.model();
  std::error_code ec;
  fs::remove_all(lay.depth_dir, ec);
  fs::create_directories(lay.depth_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + lay.depth_dir.string());
  parallel_for(frames.size(), [&](std::size_t k) {
    io::write_depth(lay.depth_file(frames[k].id), densify_frame(frames[k], cam, cfg.depth));
  });
}

void stage_fuse(const PipelineConfig& cfg, const fs::path& trajectory, const fs::path& out) {
  const Layout lay(cfg.output_dir);
  const CameraModel cam = cfg.camera.model();
  require_file(lay.frames_dir, "simulate");
  const auto frames = io::read_frames(lay.frames_dir);
  const auto depth = load_depth_maps(lay, frames, cam);
  require_file(trajectory, "drift");
  const auto poses = poses_for_frames(frames, io::read_tum(trajectory));
  io::write_ply(out, fuse_map(depth, cam, poses, cfg.metrics.map_stride));
}

SolveReport stage_optimize(const PipelineConfig& cfg, const std::optional<fs::path>& initial,
                           const std::optional<fs::path>& out) {
  const Layout lay(cfg.output_dir);
  const auto in = load_optimize_inputs(cfg, lay);
  const fs::path init_path = initial.value_or(lay.drifted_tum);
  require_file(init_path, "drift");
  const auto init = poses_for_frames(in.frames, io::read_tum(init_path));
  const Problem problem =
      build_problem(in.cam, in.frames, in.depth, in.correspondences, init, in.plan, cfg.terms, cfg.depth.lift);
  SolveOptions options = cfg.solver;
  std::error_code ec;
  if (fs::exists(lay.gt_tum, ec)) options.ground_truth = poses_for_frames(in.frames, io::read_tum(lay.gt_tum));
  const SolveResult result = solve(problem, options);
  io::write_tum(out.value_or(lay.refined_tum), trajectory_for_frames(in.frames, result.poses));
  io::write_text(lay.solve_report, io::format_solve_report(result.report));
  return result.report;
}

MetricsReport stage_eval(const PipelineConfig& cfg, const std::optional<fs::path>& est,
                         const std::optional<fs::path>& gt, const std::optional<fs::path>& map,
                         const std::optional<fs::path>& reference) {
  const Layout lay(cfg.output_dir);
  const fs::path est_path = est.value_or(lay.refined_tum);
  const fs::path gt_path = gt.value_or(lay.gt_tum);
  require_file(est_path, "optimize");
  require_file(gt_path, "simulate");
  const Trajectory est_traj = io::read_tum(est_path);
  const Trajectory gt_traj = io::read_tum(gt_path);
  SemanticPointCloud map_cloud;
  if (map) {
    map_cloud = io::read_ply(*map);
  } else {
    const CameraModel cam = cfg.camera.model();
    require_file(lay.frames_dir, "simulate");
    const auto frames = io::read_frames(lay.frames_dir);
    map_cloud = fuse_map(load_depth_maps(lay, frames, cam), cam, poses_for_frames(frames, est_traj),
                         cfg.metrics.map_stride);
  }
  const fs::path ref_path = reference.value_or(lay.reference_ply);
  require_file(ref_path, "sample");
  const auto ref_cloud = thin_cloud(io::read_ply(ref_path), cfg.metrics.reference_stride);
  const MetricsReport rep = evaluate_metrics(est_traj, gt_traj, map_cloud, ref_cloud, cfg.metrics);
  io::write_text(lay.metrics_json, io::format_metrics_json(rep));
  io::write_text(lay.metrics_csv, io::metrics_csv_header() + "\n" + io::format_metrics_csv_row(rep) + "\n");
  return rep;
}

std::vector<AblationRow> stage_ablate(const PipelineConfig& cfg, const std::optional<fs::path>& out) {
  const Layout lay(cfg.output_dir);
  const auto in = load_optimize_inputs(cfg, lay);
  require_file(lay.drifted_tum, "drift");
  require_file(lay.gt_tum, "simulate");
  const Trajectory gt_traj = io::read_tum(lay.gt_tum);
  const auto init = poses_for_frames(in.frames, io::read_tum(lay.drifted_tum));
  const auto gt = poses_for_frames(in.frames, gt_traj);
  require_file(lay.reference_ply, "sample");
  const auto ref_cloud = thin_cloud(io::read_ply(lay.reference_ply), cfg.metrics.reference_stride);

  std::vector<AblationRow> rows;
  std::string csv = ablation_csv_header() + "\n";
  for (const auto& terms : cfg.ablation_rows) {
    TermConfig tc = cfg.terms;
    for (Term t : kAllTerms) tc[t].enabled = std::find(terms.begin(), terms.end(), t) != terms.end();
    const Problem problem =
        build_problem(in.cam, in.frames, in.depth, in.correspondences, init, in.plan, tc, cfg.depth.lift);
    SolveOptions options = cfg.solver;
    options.ground_truth = gt;
    const SolveResult result = solve(problem, options);
    AblationRow row;
    row.terms = terms;
    row.report = result.report;
    row.metrics = evaluate_metrics(trajectory_for_frames(in.frames, result.poses), gt_traj,
                                   fuse_map(in.depth, in.cam, result.poses, cfg.metrics.map_stride), ref_cloud,
                                   cfg.metrics);
    csv += format_ablation_row(row) + "\n";
    rows.push_back(std::move(row));
  }
  io::write_text(out.value_or(lay.ablation_csv), csv);
  return rows;
}

void stage_plot(const std::vector<fs::path>& reports, const std::vector<std::string>& labels, const fs::path& out) {
  std::vector<SolveReport> parsed;
  for (const auto& p : reports) parsed.push_back(io::parse_solve_report(io::read_text(p), p.string()));
  std::vector<std::string> names = labels;
  for (std::size_t k = names.size(); k < reports.size(); ++k) names.push_back(reports[k].stem().string());
  io::write_text(out, render_plot_svg(parsed, names));
}

void run_all(const PipelineConfig& cfg, bool with_ablation) {
  const Layout lay(cfg.output_dir);
  stage_scene(cfg);
  stage_sample(cfg);
  stage_floorplan(cfg);
  stage_simulate(cfg);
  stage_drift(cfg);
  stage_densify(cfg);
  stage_fuse(cfg, lay.drifted_tum, lay.map_initial_ply);
  stage_optimize(cfg);
  stage_fuse(cfg, lay.refined_tum, lay.map_refined_ply);
  stage_eval(cfg, lay.refined_tum, lay.gt_tum, lay.map_refined_ply);
  stage_plot({lay.solve_report}, {"refined"}, lay.plot_svg);
  if (with_ablation) stage_ablate(cfg);
}

}  // namespace bimcap::pipeline
