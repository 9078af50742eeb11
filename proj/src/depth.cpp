#include "bimcap/depth.hpp"

#include <algorithm>
#include <boost/polygon/voronoi.hpp>
#include <cmath>
#include <map>

#include "bimcap/error.hpp"
#include "bimcap/kdtree.hpp"

namespace bimcap {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Sub-pixel grid used to feed the integer Voronoi builder.
constexpr double kSubpixelScale = 16.0;

struct UniqueSamples {
  std::vector<Vec2> pixels;
  std::vector<std::size_t> sample_index;  // into frame.samples
};

UniqueSamples unique_samples(const Frame& frame) {
  UniqueSamples out;
  std::map<std::pair<long, long>, std::size_t> seen;
  for (std::size_t k = 0; k < frame.samples.size(); ++k) {
    const auto& s = frame.samples[k];
    const auto key = std::make_pair(std::lround(s.u * kSubpixelScale), std::lround(s.v * kSubpixelScale));
    if (seen.emplace(key, k).second) {
      out.pixels.emplace_back(s.u, s.v);
      out.sample_index.push_back(k);
    }
  }
  return out;
}

}  // namespace

DepthMap::DepthMap(int w, int h)
    : width(w),
      height(h),
      depth(static_cast<std::size_t>(w) * h, kNaN),
      label(static_cast<std::size_t>(w) * h, kUnlabeled) {}

bool DepthMap::valid(int u, int v) const {
  if (u < 0 || v < 0 || u >= width || v >= height) return false;
  const double d = depth[index(u, v)];
  return std::isfinite(d) && d > 0.0;
}

std::optional<SemanticClass> DepthMap::class_at(int u, int v) const {
  const std::uint8_t l = label[index(u, v)];
  if (l == kUnlabeled) return std::nullopt;
  return static_cast<SemanticClass>(l);
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) n += valid(u, v) ? 1 : 0;
  }
  return n;
}

std::optional<double> DepthMap::sample(double u, double v) const {
  if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1)) {
    const int ru = static_cast<int>(std::lround(u));
    const int rv = static_cast<int>(std::lround(v));
    if (valid(ru, rv)) return at(ru, rv);
    return std::nullopt;
  }
  const int x0 = std::min(static_cast<int>(std::floor(u)), std::max(width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(v)), std::max(height - 2, 0));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  if (valid(x0, y0) && valid(x1, y0) && valid(x0, y1) && valid(x1, y1)) {
    const double fx = u - x0;
    const double fy = v - y0;
    return (1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x1, y0) + (1 - fx) * fy * at(x0, y1) +
           fx * fy * at(x1, y1);
  }
  const int ru = static_cast<int>(std::lround(u));
  const int rv = static_cast<int>(std::lround(v));
  if (valid(ru, rv)) return at(ru, rv);
  return std::nullopt;
}

std::vector<std::array<std::size_t, 3>> delaunay_triangles(const std::vector<Vec2>& pixels) {
  using boost::polygon::point_data;
  std::vector<point_data<long long>> sites;
  sites.reserve(pixels.size());
  for (const auto& p : pixels) {
    sites.emplace_back(std::llround(p.x() * kSubpixelScale), std::llround(p.y() * kSubpixelScale));
  }
  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  std::vector<std::array<std::size_t, 3>> tris;
  std::vector<std::size_t> ring;
  for (const auto& vertex : vd.vertices()) {
    ring.clear();
    const auto* start = vertex.incident_edge();
    const auto* e = start;
    do {
      const std::size_t site = e->cell()->source_index();
      if (ring.empty() || (ring.back() != site && ring.front() != site)) ring.push_back(site);
      e = e->rot_next();
    } while (e != start);
    // Co-circular sites share one Voronoi vertex; fan-triangulate the ring.
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) tris.push_back({ring[0], ring[k], ring[k + 1]});
  }
  return tris;
}

void assign_nearest_classes(DepthMap& dm, const Frame& frame) {
  if (frame.samples.empty()) return;
  std::vector<Vec2> pts;
  pts.reserve(frame.samples.size());
  for (const auto& s : frame.samples) pts.emplace_back(s.u, s.v);
  const KdTree<2> tree(pts);
  for (int v = 0; v < dm.height; ++v) {
    for (int u = 0; u < dm.width; ++u) {
      if (!dm.valid(u, v)) continue;
      const auto nn = tree.nearest(Vec2(u, v));
      dm.label[dm.index(u, v)] = static_cast<std::uint8_t>(frame.samples[nn.index].cls);
    }
  }
}

DepthMap densify_linear(const Frame& frame, const CameraModel& cam, InterpSpace space) {
  const UniqueSamples uniq = unique_samples(frame);
  if (uniq.pixels.size() < 3) throw Error(ErrorCode::degenerate_input, "densify needs at least 3 samples");
  const auto tris = delaunay_triangles(uniq.pixels);
  if (tris.empty()) throw Error(ErrorCode::degenerate_input, "densify samples are collinear");

  DepthMap dm(cam.width, cam.height);
  std::vector<std::uint8_t> filled(dm.depth.size(), 0);
  for (const auto& tri : tris) {
    std::array<Vec2, 3> p;
    std::array<double, 3> d;
    for (int k = 0; k < 3; ++k) {
      p[k] = uniq.pixels[tri[k]];
      d[k] = frame.samples[uniq.sample_index[tri[k]]].depth;
    }
    const double denom = (p[1].y() - p[2].y()) * (p[0].x() - p[2].x()) + (p[2].x() - p[1].x()) * (p[0].y() - p[2].y());
    if (std::abs(denom) < 1e-12) continue;
    const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}))));
    const int u1 = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}))));
    const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}))));
    const int v1 = std::min(cam.height - 1, static_cast<int>(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}))));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const std::size_t idx = dm.index(u, v);
        if (filled[idx]) continue;
        double l0 = ((p[1].y() - p[2].y()) * (u - p[2].x()) + (p[2].x() - p[1].x()) * (v - p[2].y())) / denom;
        double l1 = ((p[2].y() - p[0].y()) * (u - p[2].x()) + (p[0].x() - p[2].x()) * (v - p[2].y())) / denom;
        double l2 = 1.0 - l0 - l1;
        constexpr double kEdgeTol = -1e-9;
        if (l0 < kEdgeTol || l1 < kEdgeTol || l2 < kEdgeTol) continue;
        l0 = std::max(l0, 0.0);
        l1 = std::max(l1, 0.0);
        l2 = std::max(l2, 0.0);
        const double s = l0 + l1 + l2;
        l0 /= s;
        l1 /= s;
        l2 /= s;
        double value = 0.0;
        if (space == InterpSpace::depth) {
          value = l0 * d[0] + l1 * d[1] + l2 * d[2];
        } else {
          value = 1.0 / (l0 / d[0] + l1 / d[1] + l2 / d[2]);
        }
        // Keep the interpolant inside the vertex range despite round-off.
        value = std::clamp(value, std::min({d[0], d[1], d[2]}), std::max({d[0], d[1], d[2]}));
        dm.depth[idx] = value;
        filled[idx] = 1;
      }
    }
  }
  assign_nearest_classes(dm, frame);
  return dm;
}

DepthMap splat_samples(const Frame& frame, const CameraModel& cam) {
  DepthMap dm(cam.width, cam.height);
  for (const auto& s : frame.samples) {
    const int u = static_cast<int>(std::lround(s.u));
    const int v = static_cast<int>(std::lround(s.v));
    if (u < 0 || v < 0 || u >= dm.width || v >= dm.height || !(s.depth > 0.0)) continue;
    dm.depth[dm.index(u, v)] = s.depth;
    dm.label[dm.index(u, v)] = static_cast<std::uint8_t>(s.cls);
  }
  return dm;
}

DepthMap smooth_planar_regions(const DepthMap& dm, ClassSet classes, int radius) {
  if (radius < 1) throw Error(ErrorCode::invalid_argument, "smoothing radius must be >= 1");
  DepthMap out = dm;
  const int w = dm.width;
  const int h = dm.height;
  const auto sat_index = [w](int u, int v) { return static_cast<std::size_t>(v) * (w + 1) + u; };
  std::vector<double> sum(static_cast<std::size_t>(w + 1) * (h + 1));
  std::vector<long> count(sum.size());
  for (SemanticClass cls : kAllSemanticClasses) {
    if (!classes.contains(cls)) continue;
    const auto tag = static_cast<std::uint8_t>(cls);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0L);
    bool any = false;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const bool use = dm.valid(u, v) && dm.label[dm.index(u, v)] == tag;
        any = any || use;
        sum[sat_index(u + 1, v + 1)] = (use ? dm.at(u, v) : 0.0) + sum[sat_index(u, v + 1)] +
                                       sum[sat_index(u + 1, v)] - sum[sat_index(u, v)];
        count[sat_index(u + 1, v + 1)] =
            (use ? 1 : 0) + count[sat_index(u, v + 1)] + count[sat_index(u + 1, v)] - count[sat_index(u, v)];
      }
    }
    if (!any) continue;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!dm.valid(u, v) || dm.label[dm.index(u, v)] != tag) continue;
        const int a = std::max(u - radius, 0);
        const int b = std::min(u + radius + 1, w);
        const int c = std::max(v - radius, 0);
        const int d = std::min(v + radius + 1, h);
        const long n = count[sat_index(b, d)] - count[sat_index(a, d)] - count[sat_index(b, c)] + count[sat_index(a, c)];
        const double s = sum[sat_index(b, d)] - sum[sat_index(a, d)] - sum[sat_index(b, c)] + sum[sat_index(a, c)];
        if (n > 0) out.depth[dm.index(u, v)] = s / static_cast<double>(n);
      }
    }
  }
  return out;
}

DepthMap render_dense_depth(const SceneRaycaster& caster, const CameraModel& cam, const Pose& pose) {
  DepthMap dm(cam.width, cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const auto hit = caster.cast_pixel(cam, pose, u, v);
      if (!hit) continue;
      dm.depth[dm.index(u, v)] = hit->depth;
      dm.label[dm.index(u, v)] = static_cast<std::uint8_t>(hit->cls);
    }
  }
  return dm;
}

SemanticPointCloud lift_labeled_points(const DepthMap& dm, const CameraModel& cam, const Pose& pose, ClassSet classes,
                                       int stride) {
  if (stride < 1) throw Error(ErrorCode::invalid_argument, "lift stride must be >= 1");
  const Pose world_from_cam = camera_pose(cam, pose);
  SemanticPointCloud out;
  for (int v = 0; v < dm.height; v += stride) {
    for (int u = 0; u < dm.width; u += stride) {
      if (!dm.valid(u, v)) continue;
      const auto cls = dm.class_at(u, v);
      if (!cls || !classes.contains(*cls)) continue;
      out.points.push_back({apply(world_from_cam, backproject(cam, u, v, dm.at(u, v))), *cls});
    }
  }
  return out;
}

}  // namespace bimcap
