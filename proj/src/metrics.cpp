#include "bimcap/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "bimcap/error.hpp"
#include "bimcap/kdtree.hpp"

namespace bimcap {
namespace {

struct AteAccumulator {
  double pos2 = 0.0;
  double rot2 = 0.0;
  double yaw2 = 0.0;
  double pitch2 = 0.0;
  double roll2 = 0.0;
  std::size_t n = 0;

  void add(const Pose& est, const Pose& gt) {
    pos2 += (est.translation - gt.translation).squaredNorm();
    const double g = rotation_geodesic(gt, est);
    rot2 += g * g;
    const auto ypr = to_yaw_pitch_roll(gt.rotation.conjugate() * est.rotation);
    yaw2 += ypr.yaw * ypr.yaw;
    pitch2 += ypr.pitch * ypr.pitch;
    roll2 += ypr.roll * ypr.roll;
    ++n;
  }

  [[nodiscard]] AteResult result() const {
    AteResult r;
    r.matched = n;
    if (n == 0) return r;
    const double inv = 1.0 / static_cast<double>(n);
    r.ate_pos = std::sqrt(pos2 * inv);
    r.ate_rot = std::sqrt(rot2 * inv);
    r.rmse_yaw = std::sqrt(yaw2 * inv);
    r.rmse_pitch = std::sqrt(pitch2 * inv);
    r.rmse_roll = std::sqrt(roll2 * inv);
    return r;
  }
};

}  // namespace

AteResult ate(const Trajectory& est_in, const Trajectory& gt_in, double max_dt) {
  auto by_time = [](const TimedPose& a, const TimedPose& b) { return a.timestamp < b.timestamp; };
  std::vector<TimedPose> est = est_in.poses;
  std::vector<TimedPose> gt = gt_in.poses;
  std::stable_sort(est.begin(), est.end(), by_time);
  std::stable_sort(gt.begin(), gt.end(), by_time);

  AteAccumulator acc;
  std::size_t unmatched = 0;
  for (const auto& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e, by_time);
    const TimedPose* best = nullptr;
    double best_dt = std::numeric_limits<double>::infinity();
    for (auto cand : {it, it == gt.begin() ? gt.end() : std::prev(it)}) {
      if (cand == gt.end()) continue;
      const double dt = std::abs(cand->timestamp - e.timestamp);
      if (dt < best_dt) {
        best_dt = dt;
        best = &*cand;
      }
    }
    if (best == nullptr || best_dt > max_dt) {
      ++unmatched;
      continue;
    }
    acc.add(e.pose, best->pose);
  }
  if (acc.n == 0) throw Error(ErrorCode::association, "no estimated pose matched a ground-truth timestamp");
  AteResult r = acc.result();
  r.unmatched = unmatched;
  return r;
}

AteResult ate(const std::vector<Pose>& est, const std::vector<Pose>& gt) {
  if (est.size() != gt.size() || est.empty()) {
    throw Error(ErrorCode::association, "pose lists must be non-empty and of equal length");
  }
  AteAccumulator acc;
  for (std::size_t k = 0; k < est.size(); ++k) acc.add(est[k], gt[k]);
  return acc.result();
}

Mat3 neighborhood_covariance(const std::vector<Vec3>& points, const std::vector<std::size_t>& indices) {
  Vec3 mean = Vec3::Zero();
  for (std::size_t i : indices) mean += points[i];
  mean /= static_cast<double>(indices.size());
  Mat3 cov = Mat3::Zero();
  for (std::size_t i : indices) {
    const Vec3 d = points[i] - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(indices.size());
}

double gaussian_entropy(const Mat3& cov) {
  const Mat3 ridged = cov + kCovarianceRidge * Mat3::Identity();
  double det = ridged.determinant();
  if (!(det > 0.0)) {
    // Round-off on a rank-deficient neighborhood; fall back to clamped eigenvalues.
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    det = 1.0;
    for (int k = 0; k < 3; ++k) det *= std::max(es.eigenvalues()[k], 0.0) + kCovarianceRidge;
  }
  return 0.5 * (3.0 * std::log(2.0 * kPi * std::exp(1.0)) + std::log(det));
}

double plane_spread(const Mat3& cov) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues()[0], 0.0));
}

MapMetric mme(const std::vector<Vec3>& cloud, const std::vector<Vec3>& reference, const NeighborhoodParams& params) {
  if (!(params.radius > 0.0) || params.min_neighbors < 4) {
    throw Error(ErrorCode::invalid_argument, "mme requires radius > 0 and min_neighbors >= 4");
  }
  std::vector<Vec3> merged = cloud;
  merged.insert(merged.end(), reference.begin(), reference.end());
  const KdTree<3> tree(merged);
  MapMetric m;
  double sum = 0.0;
  for (const auto& p : cloud) {
    const auto nbrs = tree.radius_search(p, params.radius);
    if (nbrs.size() < params.min_neighbors) {
      ++m.skipped;
      continue;
    }
    sum += gaussian_entropy(neighborhood_covariance(merged, nbrs));
    ++m.qualifying;
  }
  if (m.qualifying == 0) throw Error(ErrorCode::metric_undefined, "MME undefined: no point has enough neighbors");
  m.value = sum / static_cast<double>(m.qualifying);
  return m;
}

MapMetric mpv(const std::vector<Vec3>& cloud, const NeighborhoodParams& params) {
  if (!(params.radius > 0.0) || params.min_neighbors < 4) {
    throw Error(ErrorCode::invalid_argument, "mpv requires radius > 0 and min_neighbors >= 4");
  }
  const KdTree<3> tree(cloud);
  MapMetric m;
  double sum = 0.0;
  for (const auto& p : cloud) {
    const auto nbrs = tree.radius_search(p, params.radius);
    if (nbrs.size() < params.min_neighbors) {
      ++m.skipped;
      continue;
    }
    sum += plane_spread(neighborhood_covariance(cloud, nbrs));
    ++m.qualifying;
  }
  if (m.qualifying == 0) throw Error(ErrorCode::metric_undefined, "MPV undefined: no point has enough neighbors");
  m.value = sum / static_cast<double>(m.qualifying);
  return m;
}

double nnd(const std::vector<Vec3>& cloud, const std::vector<Vec3>& reference, NndMode mode) {
  if (cloud.empty()) throw Error(ErrorCode::metric_undefined, "NND of an empty cloud");
  double sum = 0.0;
  if (mode == NndMode::to_reference) {
    if (reference.empty()) throw Error(ErrorCode::metric_undefined, "NND against an empty reference");
    const KdTree<3> tree(reference);
    for (const auto& p : cloud) sum += std::sqrt(tree.nearest(p).squared_distance);
  } else {
    if (cloud.size() < 2) throw Error(ErrorCode::metric_undefined, "within-cloud NND needs two points");
    const KdTree<3> tree(cloud);
    for (std::size_t i = 0; i < cloud.size(); ++i) sum += std::sqrt(tree.nearest(cloud[i], i).squared_distance);
  }
  return sum / static_cast<double>(cloud.size());
}

}  // namespace bimcap
