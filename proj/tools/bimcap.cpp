#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bimcap/error.hpp"
#include "bimcap/io.hpp"
#include "bimcap/parallel.hpp"
#include "bimcap/pipeline/config.hpp"
#include "bimcap/pipeline/stages.hpp"

namespace {

using bimcap::pipeline::PipelineConfig;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int threads = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "pipeline config JSON");
  cmd->add_option("--set", c.overrides, "override a config value, key.path=value")->take_all();
  cmd->add_option("--threads", c.threads, "worker thread cap (0 = all cores)");
}

PipelineConfig load(const Common& c) {
  std::optional<fs::path> path;
  if (!c.config.empty()) path = c.config;
  PipelineConfig cfg = bimcap::pipeline::load_config(path, c.overrides);
  if (c.threads >= 0) cfg.threads = static_cast<unsigned>(c.threads);
  bimcap::set_thread_count(cfg.threads);
  return cfg;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose refinement of drifted trajectories against a BIM floor plan"};
  app.require_subcommand(1);

  Common common;
  std::string in_path;
  std::string out_path;
  std::string gt_path;
  std::string map_path;
  std::string ref_path;
  std::vector<std::string> report_paths;
  std::vector<std::string> labels;
  bool with_ablation = false;

  auto* scene = app.add_subcommand("scene", "build or ingest the scene and export per-entity OBJ files");
  auto* sample = app.add_subcommand("sample", "sample the scene into a semantic PLY");
  auto* floorplan = app.add_subcommand("floorplan", "vectorize a semantic PLY into a floor plan");
  floorplan->add_option("--input", in_path, "semantic PLY (default: <out>/reference.ply)");
  floorplan->add_option("--output", out_path, "plan JSON (default: <out>/plan.json)");
  auto* simulate = app.add_subcommand("simulate", "render frames, correspondences and the ground-truth trajectory");
  auto* drift = app.add_subcommand("drift", "apply synthetic drift to a trajectory");
  drift->add_option("--input", in_path, "input TUM (default: <out>/gt.tum)");
  drift->add_option("--output", out_path, "output TUM (default: <out>/drifted.tum)");
  auto* densify = app.add_subcommand("densify", "interpolate sparse frames into dense depth maps");
  auto* fuse = app.add_subcommand("fuse", "fuse frames into a semantic PLY map");
  fuse->add_option("--trajectory", in_path, "TUM trajectory (default: <out>/drifted.tum)");
  fuse->add_option("--output", out_path, "output PLY (default: <out>/map_initial.ply)");
  auto* optimize = app.add_subcommand("optimize", "refine the poses against the floor plan");
  optimize->add_option("--initial", in_path, "initial TUM (default: <out>/drifted.tum)");
  optimize->add_option("--output", out_path, "refined TUM (default: <out>/refined.tum)");
  auto* eval = app.add_subcommand("eval", "trajectory and map metrics");
  eval->add_option("--est", in_path, "estimated TUM (default: <out>/refined.tum)");
  eval->add_option("--gt", gt_path, "ground-truth TUM (default: <out>/gt.tum)");
  eval->add_option("--map", map_path, "map PLY (default: fused from the estimate)");
  eval->add_option("--reference", ref_path, "reference PLY (default: <out>/reference.ply)");
  auto* ablate = app.add_subcommand("ablate", "solve once per term combination and tabulate the metrics");
  ablate->add_option("--output", out_path, "CSV (default: <out>/ablation.csv)");
  auto* plot = app.add_subcommand("plot", "SVG of ATE against iteration");
  plot->add_option("reports", report_paths, "solve report JSON files")->required();
  plot->add_option("--label", labels, "legend label per report");
  plot->add_option("--output", out_path, "SVG path")->required();
  auto* run = app.add_subcommand("run", "every stage in order");
  run->add_flag("--ablate", with_ablation, "also run the ablation grid");

  for (auto* cmd : {scene, sample, floorplan, simulate, drift, densify, fuse, optimize, eval, ablate, run}) {
    add_common(cmd, common);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "config: " << e.what() << "\n";
    return 2;
  }

  try {
    if (plot->parsed()) {
      std::vector<fs::path> paths(report_paths.begin(), report_paths.end());
      bimcap::pipeline::stage_plot(paths, labels, out_path);
      return 0;
    }
    const PipelineConfig cfg = load(common);
    const bimcap::pipeline::Layout lay(cfg.output_dir);
    if (scene->parsed()) {
      std::cout << bimcap::pipeline::stage_scene(cfg);
    } else if (sample->parsed()) {
      bimcap::pipeline::stage_sample(cfg);
    } else if (floorplan->parsed()) {
      bimcap::pipeline::stage_floorplan(cfg, opt_path(in_path), opt_path(out_path));
    } else if (simulate->parsed()) {
      bimcap::pipeline::stage_simulate(cfg);
    } else if (drift->parsed()) {
      const auto dc = bimcap::pipeline::stage_drift(cfg, opt_path(in_path), opt_path(out_path));
      std::cout << "sigma_t " << dc.sigma_t << " sigma_pitch " << dc.sigma_pitch << " sigma_yaw " << dc.sigma_yaw
                << "\n";
    } else if (densify->parsed()) {
      bimcap::pipeline::stage_densify(cfg);
    } else if (fuse->parsed()) {
      bimcap::pipeline::stage_fuse(cfg, opt_path(in_path).value_or(lay.drifted_tum),
                                   opt_path(out_path).value_or(lay.map_initial_ply));
    } else if (optimize->parsed()) {
      const auto rep = bimcap::pipeline::stage_optimize(cfg, opt_path(in_path), opt_path(out_path));
      std::cout << "iterations " << rep.iterations << " cost " << rep.initial_cost << " -> " << rep.final_cost << " ("
                << bimcap::termination_name(rep.termination) << ")\n";
    } else if (eval->parsed()) {
      const auto rep = bimcap::pipeline::stage_eval(cfg, opt_path(in_path), opt_path(gt_path), opt_path(map_path),
                                                    opt_path(ref_path));
      std::cout << bimcap::io::metrics_csv_header() << "\n" << bimcap::io::format_metrics_csv_row(rep) << "\n";
    } else if (ablate->parsed()) {
      const auto rows = bimcap::pipeline::stage_ablate(cfg, opt_path(out_path));
      std::cout << bimcap::pipeline::ablation_csv_header() << "\n";
      for (const auto& row : rows) std::cout << bimcap::pipeline::format_ablation_row(row) << "\n";
    } else if (run->parsed()) {
      bimcap::pipeline::run_all(cfg, with_ablation);
    }
  } catch (const bimcap::Error& e) {
    std::cerr << bimcap::error_code_name(e.code()) << ": " << e.what() << "\n";
    return bimcap::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
