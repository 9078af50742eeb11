#pragma once

#include <cstdint>

#include "bimcap/simulate.hpp"

namespace bimcap {

struct DriftConfig {
  double sigma_t = 0.0;      // meters, per-axis random-walk increment std
  double sigma_pitch = 0.0;  // degrees
  double sigma_yaw = 0.0;    // degrees
  std::uint64_t seed = 0;

  void validate() const;
};

// Translation: independent Gaussian random walk per axis added to the ground truth.
// Rotation: per-pose independent yaw and pitch offsets applied about the sensor's own
// axes, R' = R * Rz(dyaw) * Ry(dpitch). Roll is never perturbed.
Trajectory apply_drift(const Trajectory& gt, const DriftConfig& cfg);

struct CalibrationOptions {
  int max_steps = 60;
  double accept_rel_tol = 0.05;
  double stop_rel_tol = 1e-3;
};

// Bisects scalar multipliers on sigma_t and on sigma_pitch = sigma_yaw until the drifted
// trajectory's ATE (position, rotation) matches the targets for the given seed.
DriftConfig calibrate_sigma(const Trajectory& gt, double target_ate_pos, double target_ate_rot, std::uint64_t seed,
                            const CalibrationOptions& options = {});

}  // namespace bimcap
