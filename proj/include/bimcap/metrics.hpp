#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/scene.hpp"
#include "bimcap/simulate.hpp"

namespace bimcap {

struct AteResult {
  double ate_pos = 0.0;     // meters
  double ate_rot = 0.0;     // degrees
  double rmse_yaw = 0.0;    // degrees, of R_gt^T R_est
  double rmse_pitch = 0.0;
  double rmse_roll = 0.0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
};

// Associates each estimated pose with the nearest ground-truth stamp within `max_dt`.
// No alignment is applied; both trajectories share the model frame.
AteResult ate(const Trajectory& est, const Trajectory& gt, double max_dt = 0.05);

// Index-matched variant for pose vectors of equal length.
AteResult ate(const std::vector<Pose>& est, const std::vector<Pose>& gt);

struct MapMetric {
  double value = 0.0;
  std::size_t qualifying = 0;
  std::size_t skipped = 0;
};

struct NeighborhoodParams {
  double radius = 0.30;
  std::size_t min_neighbors = 10;
};

// Population covariance of the selected points, two-pass.
Mat3 neighborhood_covariance(const std::vector<Vec3>& points, const std::vector<std::size_t>& indices);

inline constexpr double kCovarianceRidge = 1e-12;

// Differential entropy 0.5 * ln((2 pi e)^3 det(cov + ridge I)).
double gaussian_entropy(const Mat3& cov);

// sqrt of the smallest covariance eigenvalue.
double plane_spread(const Mat3& cov);

MapMetric mme(const std::vector<Vec3>& cloud, const std::vector<Vec3>& reference, const NeighborhoodParams& params = {});
MapMetric mpv(const std::vector<Vec3>& cloud, const NeighborhoodParams& params = {});

enum class NndMode { to_reference, within_cloud };

double nnd(const std::vector<Vec3>& cloud, const std::vector<Vec3>& reference, NndMode mode = NndMode::to_reference);

struct MetricsReport {
  AteResult ate;
  double mme = 0.0;  // nats
  double mpv = 0.0;  // meters
  double nnd = 0.0;  // meters
  std::size_t map_points = 0;
  std::size_t reference_points = 0;
  std::size_t mme_skipped = 0;
  std::size_t mpv_skipped = 0;
};

}  // namespace bimcap
