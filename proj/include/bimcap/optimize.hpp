#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "bimcap/depth.hpp"
#include "bimcap/floorplan.hpp"
#include "bimcap/geometry.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap {

enum class Term { geometric = 0, floor, wall, column, ceiling };

inline constexpr std::size_t kNumTerms = 5;
inline constexpr std::array<Term, kNumTerms> kAllTerms = {Term::geometric, Term::floor, Term::wall, Term::column,
                                                           Term::ceiling};

std::string_view term_name(Term t);
// Short column labels: G, F, W, Co, Ce.
std::string_view term_label(Term t);

struct TermSettings {
  bool enabled = true;
  double weight = 1.0;
  double huber_delta = 0.10;  // meters
};

struct TermConfig {
  std::array<TermSettings, kNumTerms> terms = {{
      {true, 1.0, 0.10},
      {true, 1.0, 0.05},
      {true, 1.0, 0.10},
      {true, 1.0, 0.10},
      {true, 1.0, 0.05},
  }};
  double assoc_gate = 0.5;  // meters

  [[nodiscard]] TermSettings& operator[](Term t) { return terms[static_cast<std::size_t>(t)]; }
  [[nodiscard]] const TermSettings& operator[](Term t) const { return terms[static_cast<std::size_t>(t)]; }
  [[nodiscard]] bool any_enabled() const;
  [[nodiscard]] bool any_bim_enabled() const;
  // Enables exactly the listed terms.
  static TermConfig only(std::initializer_list<Term> enabled);
  void validate() const;
};

// Huber loss rho(s; delta) and its IRLS weight rho'(s)/s.
double huber(double s, double delta);
double huber_weight(double s, double delta);

// A labeled point expressed in its sensor frame.
struct BimObservation {
  std::size_t pose = 0;
  Vec3 point = Vec3::Zero();
  SemanticClass cls = SemanticClass::other;
};

// A correspondence lifted into both sensor frames.
struct GeometricObservation {
  std::size_t pose_i = 0;
  std::size_t pose_j = 0;
  Vec3 point_i = Vec3::Zero();
  Vec3 point_j = Vec3::Zero();
};

struct Problem {
  std::vector<Pose> poses;
  std::vector<double> timestamps;
  std::vector<GeometricObservation> geometric;
  std::vector<BimObservation> bim;
  VectorFloorPlan plan;
  TermConfig terms;
  std::size_t dropped_correspondences = 0;
};

struct BuildOptions {
  int lift_stride = 4;
  // Neighboring depths differing by more than this fraction are treated as a surface edge
  // and make a correspondence pixel invalid.
  double max_depth_jump = 0.05;
  // Largest second difference of inverse depth around a correspondence pixel, relative to
  // the inverse depth; larger bends mark a crease between surfaces.
  double max_bend = 1e-3;
};

// Lifts labeled pixels of every depth map and the correspondence pixels into sensor frames.
// Correspondences whose pixel lacks a usable depth are dropped and counted.
Problem build_problem(const CameraModel& cam, const std::vector<Frame>& frames, const std::vector<DepthMap>& depth,
                      const std::vector<Correspondence>& correspondences, const std::vector<Pose>& initial,
                      const VectorFloorPlan& plan, const TermConfig& terms, const BuildOptions& options = {});

// Depth at a fractional pixel, bilinear in inverse depth over four valid, same-class, mutually consistent
// neighbors.
std::optional<double> sample_depth_consistent(const DepthMap& dm, double u, double v, double max_depth_jump,
                                             double max_bend = 1e-3);

// Residuals and their Jacobians with respect to the left increment (omega, nu) of each pose.
struct GeometricEval {
  Vec3 residual = Vec3::Zero();
  Eigen::Matrix<double, 3, 6> jac_i = Eigen::Matrix<double, 3, 6>::Zero();
  Eigen::Matrix<double, 3, 6> jac_j = Eigen::Matrix<double, 3, 6>::Zero();
};

struct ScalarEval {
  double residual = 0.0;
  Eigen::Matrix<double, 1, 6> jac = Eigen::Matrix<double, 1, 6>::Zero();
};

GeometricEval evaluate_geometric(const Pose& pi, const Pose& pj, const Vec3& point_i, const Vec3& point_j);
ScalarEval evaluate_plane(const Pose& pose, const Vec3& point, const Plane& plane);
// Distance of the world point's footprint to a fixed segment.
ScalarEval evaluate_segment(const Pose& pose, const Vec3& point, const Segment2D& segment);

// Nearest-segment lookup for one class, restricted to segments within the gate.
class SegmentIndex {
 public:
  SegmentIndex(std::vector<Segment2D> segments, double gate);

  [[nodiscard]] bool empty() const { return segments_.empty(); }
  [[nodiscard]] const Segment2D& segment(std::size_t k) const { return segments_[k]; }
  // Index of the nearest segment with distance <= gate; ties go to the lowest index.
  [[nodiscard]] std::optional<std::size_t> nearest(const Vec2& xy) const;

 private:
  std::vector<Segment2D> segments_;
  double gate_ = 0.5;
  double cell_ = 0.5;
  Vec2 origin_ = Vec2::Zero();
  int cols_ = 0;
  int rows_ = 0;
  std::vector<std::vector<std::size_t>> cells_;
};

// Wall/column distance with gating; nullopt when no same-class segment is within the gate.
std::optional<double> residual_segment(const Pose& pose, const Vec3& point, const SegmentIndex& index);

struct CostBreakdown {
  double total = 0.0;
  std::array<double, kNumTerms> term_cost{};
  std::array<std::size_t, kNumTerms> active{};
};

CostBreakdown total_cost(const Problem& problem, const std::vector<Pose>& poses);
CostBreakdown total_cost(const Problem& problem);

enum class FixFirstPose { automatic, on, off };
enum class Termination { converged, max_iters, stalled };

std::string_view termination_name(Termination t);

struct SolveOptions {
  int max_outer_iters = 50;
  double rel_cost_tol = 1e-6;
  double lm_lambda_init = 1e-4;
  double lm_lambda_factor = 10.0;
  int max_consecutive_rejects = 10;
  FixFirstPose fix_first_pose = FixFirstPose::automatic;
  bool translation_only = false;
  // Ground truth (index-matched) for per-iteration ATE.
  std::optional<std::vector<Pose>> ground_truth;
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double lambda = 0.0;
  std::optional<double> ate_pos;
  std::optional<double> ate_rot;
};

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<IterationRecord> history;  // entry 0 is the initial state
  Termination termination = Termination::converged;
  std::size_t dropped_correspondences = 0;
  std::array<std::size_t, kNumTerms> active_residuals{};
};

struct SolveResult {
  std::vector<Pose> poses;
  SolveReport report;
};

SolveResult solve(const Problem& problem, const SolveOptions& options = {});

}  // namespace bimcap
