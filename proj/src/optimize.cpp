#include "bimcap/optimize.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include "bimcap/error.hpp"
#include "bimcap/log.hpp"
#include "bimcap/metrics.hpp"
#include "bimcap/parallel.hpp"

namespace bimcap {
namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Row6 = Eigen::Matrix<double, 1, 6>;

std::size_t term_index(Term t) { return static_cast<std::size_t>(t); }

// Residual bookkeeping of one pose for one term, before the 1/N weighting.
struct TermAccum {
  double rho = 0.0;
  std::size_t count = 0;
  Mat6 h = Mat6::Zero();
  Vec6 g = Vec6::Zero();

  void add_scalar(const ScalarEval& e, double delta, bool linearize) {
    const double s = std::abs(e.residual);
    rho += huber(s, delta);
    ++count;
    if (!linearize) return;
    const double w = huber_weight(s, delta);
    h.noalias() += w * e.jac.transpose() * e.jac;
    g.noalias() += w * e.jac.transpose() * e.residual;
  }
};

struct PoseAccum {
  std::array<TermAccum, kNumTerms> terms;
};

struct BimContext {
  const Problem& problem;
  std::optional<SegmentIndex> walls;
  std::optional<SegmentIndex> columns;
  std::vector<std::size_t> offsets;  // bim observations of pose p: [offsets[p], offsets[p+1])

  explicit BimContext(const Problem& pr) : problem(pr) {
    const double gate = pr.terms.assoc_gate;
    if (pr.terms[Term::wall].enabled) walls.emplace(pr.plan.segments_of(SemanticClass::wall), gate);
    if (pr.terms[Term::column].enabled) columns.emplace(pr.plan.segments_of(SemanticClass::column), gate);
    offsets.assign(pr.poses.size() + 1, 0);
    for (const auto& ob : pr.bim) {
      if (ob.pose >= pr.poses.size()) throw Error(ErrorCode::invalid_argument, "observation references a missing pose");
      ++offsets[ob.pose + 1];
    }
    for (std::size_t p = 0; p < pr.poses.size(); ++p) offsets[p + 1] += offsets[p];
    if (!std::is_sorted(pr.bim.begin(), pr.bim.end(),
                        [](const BimObservation& a, const BimObservation& b) { return a.pose < b.pose; })) {
      throw Error(ErrorCode::invalid_argument, "observations must be grouped by pose");
    }
  }

  // Evaluates every BIM residual of pose p. Wall and column matches are looked up at the
  // current state and written to `assoc`, or read from it when `frozen` (-1: gated out).
  void accumulate(std::size_t p, const Pose& pose, bool linearize, PoseAccum& out, std::vector<std::int32_t>& assoc,
                  bool frozen) const {
    const TermConfig& tc = problem.terms;
    for (std::size_t k = offsets[p]; k < offsets[p + 1]; ++k) {
      const BimObservation& ob = problem.bim[k];
      switch (ob.cls) {
        case SemanticClass::floor:
          if (tc[Term::floor].enabled) {
            out.terms[term_index(Term::floor)].add_scalar(evaluate_plane(pose, ob.point, problem.plan.floor),
                                                          tc[Term::floor].huber_delta, linearize);
          }
          break;
        case SemanticClass::ceiling:
          if (tc[Term::ceiling].enabled) {
            out.terms[term_index(Term::ceiling)].add_scalar(evaluate_plane(pose, ob.point, problem.plan.ceiling),
                                                            tc[Term::ceiling].huber_delta, linearize);
          }
          break;
        case SemanticClass::wall:
        case SemanticClass::column: {
          const Term term = ob.cls == SemanticClass::wall ? Term::wall : Term::column;
          const auto& index = ob.cls == SemanticClass::wall ? walls : columns;
          if (!tc[term].enabled || !index || index->empty()) break;
          if (!frozen) {
            const auto seg = index->nearest(apply(pose, ob.point).head<2>());
            assoc[k] = seg ? static_cast<std::int32_t>(*seg) : -1;
          }
          if (assoc[k] < 0) break;
          out.terms[term_index(term)].add_scalar(
              evaluate_segment(pose, ob.point, index->segment(static_cast<std::size_t>(assoc[k]))),
              tc[term].huber_delta, linearize);
          break;
        }
        default:
          break;
      }
    }
  }
};

struct Linearization {
  CostBreakdown cost;
  std::vector<PoseAccum> per_pose;
  // Geometric blocks keyed by (i, j) with i <= j, already weighted.
  std::map<std::pair<std::size_t, std::size_t>, Mat6> geo_h;
  std::vector<Vec6> geo_g;
  std::vector<std::int32_t> assoc;  // matched segment per bim observation
};

// With `frozen`, wall and column residuals keep that association instead of re-matching.
Linearization evaluate(const Problem& problem, const BimContext& ctx, const std::vector<Pose>& poses,
                       bool linearize, const std::vector<std::int32_t>* frozen = nullptr) {
  const TermConfig& tc = problem.terms;
  const std::size_t n = poses.size();
  Linearization lin;
  lin.per_pose.resize(n);
  lin.assoc = frozen ? *frozen : std::vector<std::int32_t>(problem.bim.size(), -1);
  parallel_for(n, [&](std::size_t p) {
    ctx.accumulate(p, poses[p], linearize, lin.per_pose[p], lin.assoc, frozen != nullptr);
  });

  std::array<double, kNumTerms> rho{};
  std::array<std::size_t, kNumTerms> count{};
  for (const auto& pa : lin.per_pose) {
    for (std::size_t t = 0; t < kNumTerms; ++t) {
      rho[t] += pa.terms[t].rho;
      count[t] += pa.terms[t].count;
    }
  }

  const std::size_t gi = term_index(Term::geometric);
  if (linearize) lin.geo_g.assign(n, Vec6::Zero());
  if (tc[Term::geometric].enabled && !problem.geometric.empty()) {
    const double delta = tc[Term::geometric].huber_delta;
    const double c = tc[Term::geometric].weight / static_cast<double>(problem.geometric.size());
    for (const auto& ob : problem.geometric) {
      const auto e = evaluate_geometric(poses[ob.pose_i], poses[ob.pose_j], ob.point_i, ob.point_j);
      const double s = e.residual.norm();
      rho[gi] += huber(s, delta);
      ++count[gi];
      if (!linearize) continue;
      const double w = c * huber_weight(s, delta);
      lin.geo_g[ob.pose_i].noalias() += w * e.jac_i.transpose() * e.residual;
      lin.geo_g[ob.pose_j].noalias() += w * e.jac_j.transpose() * e.residual;
      auto add_block = [&](std::size_t a, std::size_t b, const Mat6& m) {
        auto [it, inserted] = lin.geo_h.try_emplace({a, b}, Mat6::Zero());
        it->second.noalias() += m;
      };
      add_block(ob.pose_i, ob.pose_i, w * e.jac_i.transpose() * e.jac_i);
      add_block(ob.pose_j, ob.pose_j, w * e.jac_j.transpose() * e.jac_j);
      if (ob.pose_i <= ob.pose_j) {
        add_block(ob.pose_i, ob.pose_j, w * e.jac_i.transpose() * e.jac_j);
      } else {
        add_block(ob.pose_j, ob.pose_i, w * e.jac_j.transpose() * e.jac_i);
      }
    }
  }

  for (Term t : kAllTerms) {
    const std::size_t k = term_index(t);
    lin.cost.active[k] = count[k];
    if (!tc[t].enabled || count[k] == 0) continue;
    lin.cost.term_cost[k] = tc[t].weight * rho[k] / static_cast<double>(count[k]);
    lin.cost.total += lin.cost.term_cost[k];
  }
  return lin;
}

}  // namespace

std::string_view term_name(Term t) {
  switch (t) {
    case Term::geometric: return "geometric";
    case Term::floor: return "floor";
    case Term::wall: return "wall";
    case Term::column: return "column";
    case Term::ceiling: return "ceiling";
  }
  return "unknown";
}

std::string_view term_label(Term t) {
  switch (t) {
    case Term::geometric: return "G";
    case Term::floor: return "F";
    case Term::wall: return "W";
    case Term::column: return "Co";
    case Term::ceiling: return "Ce";
  }
  return "?";
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::stalled: return "stalled";
  }
  return "unknown";
}

bool TermConfig::any_enabled() const {
  return std::any_of(terms.begin(), terms.end(), [](const TermSettings& s) { return s.enabled; });
}

bool TermConfig::any_bim_enabled() const {
  return (*this)[Term::floor].enabled || (*this)[Term::wall].enabled || (*this)[Term::column].enabled ||
         (*this)[Term::ceiling].enabled;
}

TermConfig TermConfig::only(std::initializer_list<Term> enabled) {
  TermConfig cfg;
  for (auto& s : cfg.terms) s.enabled = false;
  for (Term t : enabled) cfg[t].enabled = true;
  return cfg;
}

void TermConfig::validate() const {
  for (Term t : kAllTerms) {
    const auto& s = (*this)[t];
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) {
      throw Error(ErrorCode::invalid_argument, std::string(term_name(t)) + " weight must be >= 0");
    }
    if (!(s.huber_delta > 0.0)) {
      throw Error(ErrorCode::invalid_argument, std::string(term_name(t)) + " huber_delta must be > 0");
    }
  }
  if (!(assoc_gate > 0.0)) throw Error(ErrorCode::invalid_argument, "assoc_gate must be > 0");
}

double huber(double s, double delta) { return s <= delta ? 0.5 * s * s : delta * (s - 0.5 * delta); }

double huber_weight(double s, double delta) { return s <= delta ? 1.0 : delta / s; }

std::optional<double> sample_depth_consistent(const DepthMap& dm, double u, double v, double max_depth_jump,
                                             double max_bend) {
  if (!(u >= 0.0 && v >= 0.0 && u <= dm.width - 1 && v <= dm.height - 1)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(std::floor(u)), std::max(dm.width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(v)), std::max(dm.height - 2, 0));
  const int x1 = std::min(x0 + 1, dm.width - 1);
  const int y1 = std::min(y0 + 1, dm.height - 1);
  if (!(dm.valid(x0, y0) && dm.valid(x1, y0) && dm.valid(x0, y1) && dm.valid(x1, y1))) return std::nullopt;
  const auto cls = dm.class_at(x0, y0);
  if (dm.class_at(x1, y0) != cls || dm.class_at(x0, y1) != cls || dm.class_at(x1, y1) != cls) return std::nullopt;
  const double d00 = dm.at(x0, y0);
  const double d10 = dm.at(x1, y0);
  const double d01 = dm.at(x0, y1);
  const double d11 = dm.at(x1, y1);
  const double lo = std::min({d00, d10, d01, d11});
  const double hi = std::max({d00, d10, d01, d11});
  if (hi - lo > max_depth_jump * lo) return std::nullopt;

  // Inverse depth is affine in pixel coordinates over a plane, so its second differences
  // across the cell and its neighbors vanish unless the cell straddles a crease.
  const double tol = max_bend / lo;
  auto inv = [&](int x, int y) -> std::optional<double> {
    if (x < 0 || y < 0 || x >= dm.width || y >= dm.height) return std::nullopt;
    if (!dm.valid(x, y)) return 0.0;
    return 1.0 / dm.at(x, y);
  };
  auto bent = [&](int xa, int ya, int xb, int yb, int xc, int yc) {
    const auto a = inv(xa, ya);
    const auto c = inv(xc, yc);
    if (!a || !c) return false;
    return std::abs(*a - 2.0 * *inv(xb, yb) + *c) > tol;
  };
  if (std::abs(1.0 / d00 + 1.0 / d11 - 1.0 / d10 - 1.0 / d01) > tol) return std::nullopt;
  for (int y : {y0, y1}) {
    if (bent(x0 - 1, y, x0, y, x1, y) || bent(x0, y, x1, y, x1 + 1, y)) return std::nullopt;
  }
  for (int x : {x0, x1}) {
    if (bent(x, y0 - 1, x, y0, x, y1) || bent(x, y0, x, y1, x, y1 + 1)) return std::nullopt;
  }

  const double fx = u - x0;
  const double fy = v - y0;
  const double w = (1 - fx) * (1 - fy) / d00 + fx * (1 - fy) / d10 + (1 - fx) * fy / d01 + fx * fy / d11;
  return 1.0 / w;
}

Problem build_problem(const CameraModel& cam, const std::vector<Frame>& frames, const std::vector<DepthMap>& depth,
                      const std::vector<Correspondence>& correspondences, const std::vector<Pose>& initial,
                      const VectorFloorPlan& plan, const TermConfig& terms, const BuildOptions& options) {
  cam.validate();
  terms.validate();
  if (frames.size() != depth.size() || frames.size() != initial.size()) {
    throw Error(ErrorCode::invalid_argument, "frames, depth maps and poses must have equal counts");
  }
  if (options.lift_stride < 1) throw Error(ErrorCode::invalid_argument, "lift stride must be >= 1");
  Problem pr;
  pr.poses = initial;
  pr.plan = plan;
  pr.terms = terms;
  std::map<int, std::size_t> by_id;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!by_id.emplace(frames[k].id, k).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate frame id " + std::to_string(frames[k].id));
    }
    pr.timestamps.push_back(frames[k].timestamp);
  }

  const Pose sensor_from_cam = inverse(cam.extrinsic);
  const ClassSet bim_classes = {SemanticClass::floor, SemanticClass::ceiling, SemanticClass::wall,
                                SemanticClass::column};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const DepthMap& dm = depth[k];
    if (dm.width != cam.width || dm.height != cam.height) {
      throw Error(ErrorCode::invalid_argument, "depth map size does not match the camera");
    }
    // An identity sensor pose leaves the points in the sensor frame.
    const auto cloud = lift_labeled_points(dm, cam, Pose::identity(), bim_classes, options.lift_stride);
    for (const auto& lp : cloud.points) pr.bim.push_back({k, lp.position, lp.cls});
  }

  for (const auto& c : correspondences) {
    const auto it = by_id.find(c.frame_i);
    const auto jt = by_id.find(c.frame_j);
    if (it == by_id.end() || jt == by_id.end()) {
      throw Error(ErrorCode::invalid_argument, "correspondence references an unknown frame");
    }
    if (it->second == jt->second) throw Error(ErrorCode::invalid_argument, "correspondence within a single frame");
    const auto di = sample_depth_consistent(depth[it->second], c.u_i, c.v_i, options.max_depth_jump, options.max_bend);
    const auto dj = sample_depth_consistent(depth[jt->second], c.u_j, c.v_j, options.max_depth_jump, options.max_bend);
    if (!di || !dj) {
      ++pr.dropped_correspondences;
      continue;
    }
    pr.geometric.push_back({it->second, jt->second, apply(sensor_from_cam, backproject(cam, c.u_i, c.v_i, *di)),
                            apply(sensor_from_cam, backproject(cam, c.u_j, c.v_j, *dj))});
  }
  return pr;
}

GeometricEval evaluate_geometric(const Pose& pi, const Pose& pj, const Vec3& point_i, const Vec3& point_j) {
  GeometricEval e;
  const Vec3 qi = pi.rotation * point_i;
  const Vec3 qj = pj.rotation * point_j;
  e.residual = (qi + pi.translation) - (qj + pj.translation);
  e.jac_i.leftCols<3>() = -skew(qi);
  e.jac_i.rightCols<3>() = Mat3::Identity();
  e.jac_j.leftCols<3>() = skew(qj);
  e.jac_j.rightCols<3>() = -Mat3::Identity();
  return e;
}

ScalarEval evaluate_plane(const Pose& pose, const Vec3& point, const Plane& plane) {
  ScalarEval e;
  const Vec3 q = pose.rotation * point;
  e.residual = point_to_plane(q + pose.translation, plane);
  e.jac.leftCols<3>() = q.cross(plane.normal).transpose();
  e.jac.rightCols<3>() = plane.normal.transpose();
  return e;
}

ScalarEval evaluate_segment(const Pose& pose, const Vec3& point, const Segment2D& segment) {
  ScalarEval e;
  const Vec3 q = pose.rotation * point;
  const Vec2 xy = (q + pose.translation).head<2>();
  const auto sd = point_to_segment(xy, segment);
  e.residual = sd.distance;
  Vec3 g = Vec3::Zero();
  if (sd.distance > 1e-12) {
    g.head<2>() = (xy - sd.closest) / sd.distance;
  } else {
    const Vec2 d = (segment.end - segment.start).normalized();
    g.head<2>() = Vec2(-d.y(), d.x());
  }
  e.jac.leftCols<3>() = q.cross(g).transpose();
  e.jac.rightCols<3>() = g.transpose();
  return e;
}

SegmentIndex::SegmentIndex(std::vector<Segment2D> segments, double gate)
    : segments_(std::move(segments)), gate_(gate), cell_(std::max(gate, 0.05)) {
  if (!(gate > 0.0)) throw Error(ErrorCode::invalid_argument, "association gate must be > 0");
  if (segments_.empty()) return;
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& s : segments_) {
    lo = lo.cwiseMin(s.start).cwiseMin(s.end);
    hi = hi.cwiseMax(s.start).cwiseMax(s.end);
  }
  origin_ = lo - Vec2::Constant(gate_);
  const Vec2 extent = hi + Vec2::Constant(gate_) - origin_;
  cols_ = std::max(1, static_cast<int>(std::ceil(extent.x() / cell_)));
  rows_ = std::max(1, static_cast<int>(std::ceil(extent.y() / cell_)));
  cells_.resize(static_cast<std::size_t>(cols_) * rows_);
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& s = segments_[k];
    const Vec2 a = s.start.cwiseMin(s.end) - Vec2::Constant(gate_) - origin_;
    const Vec2 b = s.start.cwiseMax(s.end) + Vec2::Constant(gate_) - origin_;
    const int x0 = std::clamp(static_cast<int>(std::floor(a.x() / cell_)), 0, cols_ - 1);
    const int x1 = std::clamp(static_cast<int>(std::floor(b.x() / cell_)), 0, cols_ - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(a.y() / cell_)), 0, rows_ - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor(b.y() / cell_)), 0, rows_ - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) cells_[static_cast<std::size_t>(y) * cols_ + x].push_back(k);
    }
  }
}

std::optional<std::size_t> SegmentIndex::nearest(const Vec2& xy) const {
  if (segments_.empty()) return std::nullopt;
  const Vec2 rel = xy - origin_;
  if (!(rel.x() >= 0.0 && rel.y() >= 0.0)) return std::nullopt;
  const int x = static_cast<int>(std::floor(rel.x() / cell_));
  const int y = static_cast<int>(std::floor(rel.y() / cell_));
  if (x >= cols_ || y >= rows_) return std::nullopt;
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k : cells_[static_cast<std::size_t>(y) * cols_ + x]) {
    const double d = point_to_segment(xy, segments_[k]).distance;
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (!best || best_d > gate_) return std::nullopt;
  return best;
}

std::optional<double> residual_segment(const Pose& pose, const Vec3& point, const SegmentIndex& index) {
  const Vec3 w = apply(pose, point);
  const auto k = index.nearest(w.head<2>());
  if (!k) return std::nullopt;
  return point_to_segment(w.head<2>(), index.segment(*k)).distance;
}

CostBreakdown total_cost(const Problem& problem, const std::vector<Pose>& poses) {
  if (poses.size() != problem.poses.size()) throw Error(ErrorCode::invalid_argument, "pose count mismatch");
  const BimContext ctx(problem);
  return evaluate(problem, ctx, poses, false).cost;
}

CostBreakdown total_cost(const Problem& problem) { return total_cost(problem, problem.poses); }

SolveResult solve(const Problem& problem, const SolveOptions& options) {
  problem.terms.validate();
  if (options.max_outer_iters < 0 || !(options.lm_lambda_init > 0.0) || !(options.lm_lambda_factor > 1.0)) {
    throw Error(ErrorCode::invalid_argument, "invalid solver options");
  }
  if (options.ground_truth && options.ground_truth->size() != problem.poses.size()) {
    throw Error(ErrorCode::invalid_argument, "ground truth pose count mismatch");
  }
  SolveResult result;
  result.poses = problem.poses;
  SolveReport& rep = result.report;
  rep.dropped_correspondences = problem.dropped_correspondences;

  auto record = [&](int iter, double cost, double lambda) {
    IterationRecord r{iter, cost, lambda, std::nullopt, std::nullopt};
    if (options.ground_truth && !result.poses.empty()) {
      const auto a = ate(result.poses, *options.ground_truth);
      r.ate_pos = a.ate_pos;
      r.ate_rot = a.ate_rot;
    }
    rep.history.push_back(r);
  };

  if (!problem.terms.any_enabled() || problem.poses.empty()) {
    record(0, 0.0, options.lm_lambda_init);
    return result;
  }

  const TermConfig& tc = problem.terms;
  if (tc[Term::wall].enabled && problem.plan.segments_of(SemanticClass::wall).empty()) {
    log::warn("plan has no wall segments; wall term contributes nothing");
  }
  if (tc[Term::column].enabled && problem.plan.segments_of(SemanticClass::column).empty()) {
    log::warn("plan has no column segments; column term contributes nothing");
  }

  const BimContext ctx(problem);
  const std::size_t n = problem.poses.size();
  Linearization lin = evaluate(problem, ctx, result.poses, true);
  rep.initial_cost = lin.cost.total;
  rep.active_residuals = lin.cost.active;
  std::size_t active_total = 0;
  for (Term t : kAllTerms) {
    if (tc[t].enabled) active_total += lin.cost.active[term_index(t)];
  }
  if (active_total == 0) throw Error(ErrorCode::empty_problem, "no active residuals in the enabled terms");

  const bool fix_first = options.fix_first_pose == FixFirstPose::on ||
                         (options.fix_first_pose == FixFirstPose::automatic && !tc.any_bim_enabled());
  const int first_param = options.translation_only ? 3 : 0;
  const int params_per_pose = 6 - first_param;
  std::vector<int> column_of(n, -1);
  int dim = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (fix_first && p == 0) continue;
    column_of[p] = dim;
    dim += params_per_pose;
  }

  double cost = lin.cost.total;
  double lambda = options.lm_lambda_init;
  record(0, cost, lambda);
  rep.termination = Termination::max_iters;
  int rejects = 0;

  if (dim == 0 || cost <= 0.0) {
    rep.termination = Termination::converged;
    rep.final_cost = cost;
    return result;
  }

  for (int iter = 1; iter <= options.max_outer_iters; ++iter) {
    // Assemble the normal equations at the current state with frozen association.
    std::array<double, kNumTerms> scale{};
    for (Term t : kAllTerms) {
      const std::size_t k = term_index(t);
      if (tc[t].enabled && lin.cost.active[k] > 0 && t != Term::geometric) {
        scale[k] = tc[t].weight / static_cast<double>(lin.cost.active[k]);
      }
    }
    std::vector<Mat6> diag(n, Mat6::Zero());
    std::vector<Vec6> grad(n, Vec6::Zero());
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < kNumTerms; ++k) {
        if (scale[k] == 0.0) continue;
        diag[p].noalias() += scale[k] * lin.per_pose[p].terms[k].h;
        grad[p].noalias() += scale[k] * lin.per_pose[p].terms[k].g;
      }
      if (!lin.geo_g.empty()) grad[p] += lin.geo_g[p];
    }
    for (const auto& [key, block] : lin.geo_h) {
      if (key.first == key.second) diag[key.first] += block;
    }

    std::vector<Eigen::Triplet<double>> base;
    Eigen::VectorXd rhs(dim);
    Eigen::VectorXd hdiag(dim);
    auto add_block = [&](int r0, int c0, const Mat6& m, bool mirror) {
      for (int a = 0; a < params_per_pose; ++a) {
        for (int b = 0; b < params_per_pose; ++b) {
          const double v = m(first_param + a, first_param + b);
          if (v == 0.0) continue;
          base.emplace_back(r0 + a, c0 + b, v);
          if (mirror) base.emplace_back(c0 + b, r0 + a, v);
        }
      }
    };
    for (std::size_t p = 0; p < n; ++p) {
      const int c = column_of[p];
      if (c < 0) continue;
      add_block(c, c, diag[p], false);
      for (int a = 0; a < params_per_pose; ++a) {
        rhs[c + a] = -grad[p][first_param + a];
        hdiag[c + a] = diag[p](first_param + a, first_param + a);
      }
    }
    for (const auto& [key, block] : lin.geo_h) {
      if (key.first == key.second) continue;
      const int ci = column_of[key.first];
      const int cj = column_of[key.second];
      if (ci < 0 || cj < 0) continue;
      add_block(ci, cj, block, true);
    }

    bool accepted = false;
    while (!accepted) {
      std::vector<Eigen::Triplet<double>> trips = base;
      for (int k = 0; k < dim; ++k) trips.emplace_back(k, k, lambda * std::max(hdiag[k], 1e-6));
      Eigen::SparseMatrix<double> h(dim, dim);
      h.setFromTriplets(trips.begin(), trips.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
      bool step_ok = ldlt.info() == Eigen::Success;
      Eigen::VectorXd step;
      if (step_ok) {
        step = ldlt.solve(rhs);
        step_ok = ldlt.info() == Eigen::Success && step.allFinite();
      }
      if (step_ok) {
        std::vector<Pose> trial = result.poses;
        for (std::size_t p = 0; p < n; ++p) {
          const int c = column_of[p];
          if (c < 0) continue;
          Vec6 delta = Vec6::Zero();
          delta.segment(first_param, params_per_pose) = step.segment(c, params_per_pose);
          trial[p] = retract(trial[p], delta);
        }
        const double trial_cost = evaluate(problem, ctx, trial, false, &lin.assoc).cost.total;
        if (trial_cost < cost) {
          const double rel = (cost - trial_cost) / cost;
          result.poses = std::move(trial);
          lin = evaluate(problem, ctx, result.poses, true);
          cost = lin.cost.total;
          lambda = std::max(lambda / options.lm_lambda_factor, 1e-12);
          rejects = 0;
          accepted = true;
          rep.iterations = iter;
          record(iter, cost, lambda);
          if (rel < options.rel_cost_tol || cost <= 0.0) {
            rep.termination = Termination::converged;
            rep.final_cost = cost;
            return result;
          }
          break;
        }
      }
      lambda *= options.lm_lambda_factor;
      if (++rejects >= options.max_consecutive_rejects || !std::isfinite(lambda)) {
        rep.termination = Termination::stalled;
        rep.final_cost = cost;
        return result;
      }
    }
  }
  rep.final_cost = cost;
  return result;
}

}  // namespace bimcap
