#include "bimcap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "bimcap/error.hpp"

namespace bimcap {

void Trajectory::validate() const {
  if (poses.size() < 2) throw Error(ErrorCode::invalid_argument, "trajectory needs at least 2 poses");
  for (std::size_t k = 1; k < poses.size(); ++k) {
    if (!(poses[k].timestamp > poses[k - 1].timestamp)) {
      throw Error(ErrorCode::invalid_argument, "trajectory timestamps must be strictly increasing");
    }
  }
}

std::vector<Pose> Trajectory::pose_list() const {
  std::vector<Pose> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(p.pose);
  return out;
}

SceneRaycaster::SceneRaycaster(const BuildingScene& scene) {
  for (const auto& m : scene.meshes) {
    for (const auto& t : m.triangles) tris_.push_back({t.a, t.b - t.a, t.c - t.a, m.cls});
  }
  if (!tris_.empty()) build(0, static_cast<std::uint32_t>(tris_.size()));
}

std::uint32_t SceneRaycaster::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo;
  Vec3 chi = hi;
  for (std::uint32_t k = begin; k < end; ++k) {
    const Tri& t = tris_[k];
    for (const Vec3& p : {t.a, Vec3(t.a + t.e1), Vec3(t.a + t.e2)}) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 c = t.a + (t.e1 + t.e2) / 3.0;
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
  }
  Node node;
  node.lo = lo;
  node.hi = hi;
  if (end - begin <= 4) {
    node.begin = begin;
    node.count = end - begin;
    nodes_[id] = node;
    return id;
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(tris_.begin() + begin, tris_.begin() + mid, tris_.begin() + end,
                   [axis](const Tri& a, const Tri& b) {
                     return (3.0 * a.a + a.e1 + a.e2)[axis] < (3.0 * b.a + b.e1 + b.e2)[axis];
                   });
  node.left = build(begin, mid);
  node.right = build(mid, end);
  nodes_[id] = node;
  return id;
}

std::optional<RayHit> SceneRaycaster::cast(const Vec3& origin, const Vec3& direction, double min_t) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = direction.cwiseInverse();
  double best_t = std::numeric_limits<double>::infinity();
  const Tri* best = nullptr;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    double t0 = min_t;
    double t1 = best_t;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      double ta = (n.lo[a] - origin[a]) * inv_dir[a];
      double tb = (n.hi[a] - origin[a]) * inv_dir[a];
      if (std::isnan(ta) || std::isnan(tb)) continue;  // ray parallel to and on a slab plane
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      miss = t0 > t1;
    }
    if (miss) continue;
    if (n.count > 0) {
      for (std::uint32_t k = n.begin; k < n.begin + n.count; ++k) {
        const Tri& tri = tris_[k];
        const Vec3 pvec = direction.cross(tri.e2);
        const double det = tri.e1.dot(pvec);
        if (std::abs(det) < 1e-15) continue;
        const double inv = 1.0 / det;
        const Vec3 tvec = origin - tri.a;
        const double u = tvec.dot(pvec) * inv;
        if (u < 0.0 || u > 1.0) continue;
        const Vec3 qvec = tvec.cross(tri.e1);
        const double v = direction.dot(qvec) * inv;
        if (v < 0.0 || u + v > 1.0) continue;
        const double t = tri.e2.dot(qvec) * inv;
        if (t > min_t && t < best_t) {
          best_t = t;
          best = &tri;
        }
      }
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  if (best == nullptr) return std::nullopt;
  return RayHit{best_t, best->cls, origin + best_t * direction};
}

Pose camera_pose(const CameraModel& cam, const Pose& sensor_pose) {
  return compose(sensor_pose, inverse(cam.extrinsic));
}

std::optional<RayHit> SceneRaycaster::cast_pixel(const CameraModel& cam, const Pose& pose, double u, double v) const {
  const Pose wc = camera_pose(cam, pose);
  const Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  return cast(wc.translation, wc.rotation * dir_cam);
}

Frame raycast_depth(const SceneRaycaster& caster, const CameraModel& cam, const Pose& pose,
                    const std::vector<Vec2>& pattern, int frame_id, double timestamp) {
  Frame frame;
  frame.id = frame_id;
  frame.timestamp = timestamp;
  const Pose wc = camera_pose(cam, pose);
  for (const auto& px : pattern) {
    if (!cam.in_bounds(px.x(), px.y())) throw Error(ErrorCode::invalid_argument, "pattern pixel out of bounds");
    const Vec3 dir_cam((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0);
    const auto hit = caster.cast(wc.translation, wc.rotation * dir_cam);
    if (hit) frame.samples.push_back({px.x(), px.y(), hit->depth, hit->cls});
  }
  return frame;
}

std::vector<Vec2> scanline_pattern(const CameraModel& cam, int rows, int cols) {
  if (rows < 2 || cols < 2) throw Error(ErrorCode::invalid_argument, "scanline pattern needs rows, cols >= 2");
  std::vector<Vec2> out;
  long last_u = -1;
  long last_v = -1;
  for (int r = 0; r < rows; ++r) {
    const long v = std::lround(static_cast<double>(r) * (cam.height - 1) / (rows - 1));
    if (v == last_v) continue;
    last_v = v;
    last_u = -1;
    for (int c = 0; c < cols; ++c) {
      const long u = std::lround(static_cast<double>(c) * (cam.width - 1) / (cols - 1));
      if (u == last_u) continue;
      last_u = u;
      out.emplace_back(static_cast<double>(u), static_cast<double>(v));
    }
  }
  return out;
}

namespace {

bool bitwise_equal(const Pose& a, const Pose& b) {
  return std::memcmp(a.rotation.coeffs().data(), b.rotation.coeffs().data(), 4 * sizeof(double)) == 0 &&
         std::memcmp(a.translation.data(), b.translation.data(), 3 * sizeof(double)) == 0;
}

}  // namespace

std::vector<Correspondence> synth_correspondences(const SceneRaycaster& caster, const CameraModel& cam,
                                                  const Trajectory& traj, const CorrespondenceParams& params) {
  if (params.per_pair <= 0) throw Error(ErrorCode::invalid_argument, "per_pair must be positive");
  if (params.window < 1) throw Error(ErrorCode::invalid_argument, "window must be >= 1");
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Correspondence> out;
  const auto n = traj.poses.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pose& pi = traj.poses[i].pose;
    for (std::size_t j = i + 1; j < n && j <= i + static_cast<std::size_t>(params.window); ++j) {
      const Pose& pj = traj.poses[j].pose;
      const bool same_pose = bitwise_equal(pi, pj);
      const Pose cam_j_inv = inverse(camera_pose(cam, pj));
      int found = 0;
      for (int attempt = 0; attempt < params.per_pair * params.attempts_per_match && found < params.per_pair;
           ++attempt) {
        const double u = unit(rng) * cam.width;
        const double v = unit(rng) * cam.height;
        if (!cam.in_bounds(u, v)) continue;
        const auto hit_i = caster.cast_pixel(cam, pi, u, v);
        if (!hit_i) continue;
        Vec2 px_j(u, v);
        if (!same_pose) {
          const Vec3 x_j = apply(cam_j_inv, hit_i->point);
          const auto proj = project(cam, x_j);
          if (!proj) continue;
          const auto hit_j = caster.cast_pixel(cam, pj, proj->x(), proj->y());
          if (!hit_j || std::abs(hit_j->depth - x_j.z()) > params.occlusion_tolerance) continue;
          px_j = *proj;
        }
        Correspondence c{static_cast<int>(i), static_cast<int>(j), u, v, px_j.x(), px_j.y()};
        if (params.pixel_noise_sigma > 0.0) {
          c.u_i += params.pixel_noise_sigma * noise(rng);
          c.v_i += params.pixel_noise_sigma * noise(rng);
          c.u_j += params.pixel_noise_sigma * noise(rng);
          c.v_j += params.pixel_noise_sigma * noise(rng);
          if (!cam.in_bounds(c.u_i, c.v_i) || !cam.in_bounds(c.u_j, c.v_j)) continue;
        }
        out.push_back(c);
        ++found;
      }
    }
  }
  return out;
}

Trajectory generate_gt_trajectory(const BuildingScene& scene, const std::vector<Vec2>& waypoints, int n_frames,
                                  double height) {
  if (n_frames < 2) throw Error(ErrorCode::invalid_argument, "n_frames must be >= 2");
  if (waypoints.size() < 2) throw Error(ErrorCode::invalid_argument, "path needs at least 2 waypoints");
  const auto [lo, hi] = scene.footprint_bounds();
  for (const auto& w : waypoints) {
    if (w.x() < lo.x() || w.y() < lo.y() || w.x() > hi.x() || w.y() > hi.y()) {
      throw Error(ErrorCode::invalid_argument, "waypoint outside scene bounds");
    }
  }
  std::vector<double> cum{0.0};
  for (std::size_t k = 1; k < waypoints.size(); ++k) cum.push_back(cum.back() + (waypoints[k] - waypoints[k - 1]).norm());
  const double total = cum.back();
  if (!(total > 0.0)) throw Error(ErrorCode::invalid_argument, "path has zero length");

  Trajectory traj;
  std::size_t seg = 0;
  for (int k = 0; k < n_frames; ++k) {
    const double s = total * k / (n_frames - 1);
    while (seg + 2 < cum.size() && s >= cum[seg + 1]) ++seg;
    while (seg + 2 < cum.size() && cum[seg + 1] - cum[seg] <= 0.0) ++seg;
    const Vec2 a = waypoints[seg];
    const Vec2 b = waypoints[seg + 1];
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    const Vec2 p = a + f * (b - a);
    const double yaw = std::atan2(b.y() - a.y(), b.x() - a.x());
    const Pose pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), Vec3(p.x(), p.y(), height));
    traj.poses.push_back({0.1 * k, pose});
  }
  return traj;
}

}  // namespace bimcap
