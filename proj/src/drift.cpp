#include "bimcap/drift.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "bimcap/error.hpp"
#include "bimcap/metrics.hpp"

namespace bimcap {

void DriftConfig::validate() const {
  if (!(sigma_t >= 0.0) || !(sigma_pitch >= 0.0) || !(sigma_yaw >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "drift sigmas must be non-negative");
  }
}

Trajectory apply_drift(const Trajectory& gt, const DriftConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory out = gt;
  Vec3 offset = Vec3::Zero();
  for (auto& tp : out.poses) {
    for (int a = 0; a < 3; ++a) offset[a] += cfg.sigma_t * normal(rng);
    const double d_pitch = cfg.sigma_pitch * normal(rng);
    const double d_yaw = cfg.sigma_yaw * normal(rng);
    if (cfg.sigma_t != 0.0) tp.pose.translation += offset;
    if (d_pitch != 0.0 || d_yaw != 0.0) {
      const Eigen::Quaterniond perturb = Eigen::AngleAxisd(deg2rad(d_yaw), Vec3::UnitZ()) *
                                         Eigen::AngleAxisd(deg2rad(d_pitch), Vec3::UnitY());
      tp.pose.rotation = (tp.pose.rotation * perturb).normalized();
    }
  }
  return out;
}

namespace {

// Finds s >= 0 with metric(s) ~= target, for a metric increasing in s with metric(0) = 0.
double bisect_scale(const std::function<double(double)>& metric, double target, double initial,
                    const CalibrationOptions& options, const char* what) {
  int steps = 0;
  double lo = 0.0;
  double hi = initial;
  double best_s = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  auto consider = [&](double s, double value) {
    const double err = std::abs(value - target) / target;
    if (err < best_err) {
      best_err = err;
      best_s = s;
    }
    return err;
  };
  while (true) {
    const double value = metric(hi);
    if (consider(hi, value) <= options.stop_rel_tol) return hi;
    if (value >= target) break;
    lo = hi;
    hi *= 2.0;
    if (++steps >= options.max_steps) break;
  }
  while (steps < options.max_steps) {
    const double mid = 0.5 * (lo + hi);
    const double value = metric(mid);
    if (consider(mid, value) <= options.stop_rel_tol) return mid;
    (value < target ? lo : hi) = mid;
    ++steps;
  }
  if (best_err <= options.accept_rel_tol) return best_s;
  throw Error(ErrorCode::calibration_failure,
              std::string("drift calibration did not reach the ") + what + " target within the step budget");
}

}  // namespace

DriftConfig calibrate_sigma(const Trajectory& gt, double target_ate_pos, double target_ate_rot, std::uint64_t seed,
                            const CalibrationOptions& options) {
  if (!(target_ate_pos >= 0.0) || !(target_ate_rot >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "calibration targets must be non-negative");
  }
  gt.validate();
  DriftConfig cfg;
  cfg.seed = seed;
  if (target_ate_pos > 0.0) {
    cfg.sigma_t = bisect_scale(
        [&](double s) { return ate(apply_drift(gt, {s, 0.0, 0.0, seed}), gt).ate_pos; }, target_ate_pos, 0.01,
        options, "translation");
  }
  if (target_ate_rot > 0.0) {
    const double s = bisect_scale(
        [&](double v) { return ate(apply_drift(gt, {0.0, v, v, seed}), gt).ate_rot; }, target_ate_rot, 1.0,
        options, "rotation");
    cfg.sigma_pitch = s;
    cfg.sigma_yaw = s;
  }
  return cfg;
}

}  // namespace bimcap
