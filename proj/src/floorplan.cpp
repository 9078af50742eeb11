#include "bimcap/floorplan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

#include <Eigen/Eigenvalues>

#include "bimcap/error.hpp"

namespace bimcap {
namespace {

// Clockwise ring (with +y pointing "down" in scan order).
constexpr std::array<std::array<int, 2>, 8> kRing = {{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1},
}};

int ring_index(int dx, int dy) {
  for (int k = 0; k < 8; ++k) {
    if (kRing[k][0] == dx && kRing[k][1] == dy) return k;
  }
  return -1;
}

struct Grid {
  int w = 0;
  int h = 0;
  std::vector<int> v;

  Grid(int width, int height, int fill = 0) : w(width), h(height), v(static_cast<std::size_t>(width) * height, fill) {}
  [[nodiscard]] bool in(int x, int y) const { return x >= 0 && y >= 0 && x < w && y < h; }
  int& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  [[nodiscard]] int at(int x, int y) const { return in(x, y) ? v[static_cast<std::size_t>(y) * w + x] : 0; }
};

Grid morph(const Grid& g, int r, bool dilate) {
  Grid out(g.w, g.h);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      bool any = false;
      bool all = true;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const bool on = g.at(x + dx, y + dy) != 0;
          any = any || on;
          all = all && on;
        }
      }
      out.at(x, y) = (dilate ? any : all) ? 1 : 0;
    }
  }
  return out;
}

// Labels connected regions of cells with value `target`; returns label grid (0 = none) and count.
int label_regions(const Grid& g, int target, bool eight, Grid& labels) {
  int count = 0;
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      if (g.at(x, y) != target || labels.at(x, y) != 0) continue;
      ++count;
      std::deque<std::array<int, 2>> queue{{x, y}};
      labels.at(x, y) = count;
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        for (int k = 0; k < 8; ++k) {
          if (!eight && (k % 2 == 1)) continue;
          const int nx = cx + kRing[k][0];
          const int ny = cy + kRing[k][1];
          if (!g.in(nx, ny) || g.at(nx, ny) != target || labels.at(nx, ny) != 0) continue;
          labels.at(nx, ny) = count;
          queue.push_back({nx, ny});
        }
      }
    }
  }
  return count;
}

// Moore-neighbor tracing with Jacob's stopping criterion. `start` must be the first cell
// of the region in row-major scan order, so its west neighbor lies outside the region.
std::vector<std::array<int, 2>> moore_trace(const Grid& labels, int label, std::array<int, 2> start) {
  auto inside = [&](int x, int y) { return labels.at(x, y) == label; };
  std::vector<std::array<int, 2>> contour{start};
  std::array<int, 2> p = start;
  int backtrack = 0;
  const int start_backtrack = 0;
  const std::size_t max_steps = 8 * labels.v.size() + 16;
  for (std::size_t step = 0; step < max_steps; ++step) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (backtrack + k) % 8;
      if (inside(p[0] + kRing[d][0], p[1] + kRing[d][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) return contour;
    const std::array<int, 2> q = {p[0] + kRing[found][0], p[1] + kRing[found][1]};
    const int bx = p[0] + kRing[(found + 7) % 8][0];
    const int by = p[1] + kRing[(found + 7) % 8][1];
    backtrack = ring_index(bx - q[0], by - q[1]);
    p = q;
    if (p == start && backtrack == start_backtrack) break;
    contour.push_back(p);
  }
  return contour;
}

double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len = d.norm();
  if (len < 1e-15) return (p - a).norm();
  return std::abs(d.x() * (p.y() - a.y()) - d.y() * (p.x() - a.x())) / len;
}

double angle_between_deg(const Vec2& a, const Vec2& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return rad2deg(std::acos(c));
}

}  // namespace

std::vector<Segment2D> VectorFloorPlan::segments_of(SemanticClass cls) const {
  std::vector<Segment2D> out;
  for (const auto& s : segments) {
    if (s.cls == cls) out.push_back(s);
  }
  return out;
}

std::size_t OccupancyRaster::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

std::vector<Vec2> slab_filter(const SemanticPointCloud& cloud, double floor_z, double half_band, SemanticClass cls) {
  if (!(half_band > 0.0)) throw Error(ErrorCode::invalid_argument, "slab half band must be positive");
  std::vector<Vec2> out;
  for (const auto& p : cloud.points) {
    if (p.cls == cls && std::abs(p.position.z() - floor_z) <= half_band) out.push_back(p.position.head<2>());
  }
  return out;
}

OccupancyRaster rasterize(const std::vector<Vec2>& points, double resolution, int min_hits, SemanticClass cls) {
  if (!(resolution > 0.0)) throw Error(ErrorCode::invalid_argument, "raster resolution must be positive");
  OccupancyRaster raster;
  raster.resolution = resolution;
  raster.cls = cls;
  if (points.empty()) return raster;

  Vec2 lo = points.front();
  for (const auto& p : points) lo = lo.cwiseMin(p);
  const double bx = std::floor(lo.x() / resolution);
  const double by = std::floor(lo.y() / resolution);
  raster.origin = Vec2(bx * resolution, by * resolution);

  std::vector<std::array<long, 2>> idx;
  idx.reserve(points.size());
  long max_x = 0;
  long max_y = 0;
  for (const auto& p : points) {
    const long ix = static_cast<long>(std::floor(p.x() / resolution) - bx);
    const long iy = static_cast<long>(std::floor(p.y() / resolution) - by);
    idx.push_back({ix, iy});
    max_x = std::max(max_x, ix);
    max_y = std::max(max_y, iy);
  }
  raster.cols = static_cast<int>(max_x + 1);
  raster.rows = static_cast<int>(max_y + 1);
  std::vector<int> hits(static_cast<std::size_t>(raster.cols) * raster.rows, 0);
  for (const auto& [ix, iy] : idx) ++hits[static_cast<std::size_t>(iy) * raster.cols + ix];
  raster.cells.resize(hits.size());
  for (std::size_t k = 0; k < hits.size(); ++k) raster.cells[k] = hits[k] >= min_hits ? 1 : 0;
  return raster;
}

std::vector<std::vector<Vec2>> trace_contours(const OccupancyRaster& raster, int closing_radius,
                                              double min_hole_area) {
  std::vector<std::vector<Vec2>> contours;
  if (raster.cols == 0 || raster.rows == 0) return contours;
  const int r = std::max(closing_radius, 0);
  const int pad = r + 1;
  Grid grid(raster.cols + 2 * pad, raster.rows + 2 * pad);
  for (int y = 0; y < raster.rows; ++y) {
    for (int x = 0; x < raster.cols; ++x) grid.at(x + pad, y + pad) = raster.occupied(x, y) ? 1 : 0;
  }
  if (r > 0) grid = morph(morph(grid, r, true), r, false);

  auto to_world = [&](const std::array<int, 2>& c) { return raster.cell_center(c[0] - pad, c[1] - pad); };
  auto emit = [&](const Grid& labels, int count) {
    std::vector<bool> seen(static_cast<std::size_t>(count) + 1, false);
    for (int y = 0; y < labels.h; ++y) {
      for (int x = 0; x < labels.w; ++x) {
        const int l = labels.at(x, y);
        if (l <= 0 || seen[static_cast<std::size_t>(l)]) continue;
        seen[static_cast<std::size_t>(l)] = true;
        std::vector<Vec2> contour;
        for (const auto& c : moore_trace(labels, l, {x, y})) contour.push_back(to_world(c));
        contours.push_back(std::move(contour));
      }
    }
  };

  // Holes: 4-connected background regions that do not reach the padded border.
  Grid background(grid.w, grid.h);
  const int nbg = label_regions(grid, 0, false, background);
  std::vector<bool> touches_border(static_cast<std::size_t>(nbg) + 1, false);
  for (int x = 0; x < grid.w; ++x) {
    touches_border[static_cast<std::size_t>(background.at(x, 0))] = true;
    touches_border[static_cast<std::size_t>(background.at(x, grid.h - 1))] = true;
  }
  for (int y = 0; y < grid.h; ++y) {
    touches_border[static_cast<std::size_t>(background.at(0, y))] = true;
    touches_border[static_cast<std::size_t>(background.at(grid.w - 1, y))] = true;
  }
  // Each hole is traced along the occupied cells that border it.
  std::vector<std::vector<std::array<int, 2>>> hole_cells(static_cast<std::size_t>(nbg) + 1);
  for (int y = 0; y < grid.h; ++y) {
    for (int x = 0; x < grid.w; ++x) {
      const int l = background.at(x, y);
      if (l > 0 && !touches_border[static_cast<std::size_t>(l)]) hole_cells[static_cast<std::size_t>(l)].push_back({x, y});
    }
  }
  const double cell_area = raster.resolution * raster.resolution;
  for (auto& cells : hole_cells) {
    if (cells.empty() || static_cast<double>(cells.size()) * cell_area >= min_hole_area) continue;
    for (const auto& [x, y] : cells) grid.at(x, y) = 1;
    cells.clear();
  }

  Grid solid(grid.w, grid.h);
  emit(solid, label_regions(grid, 1, true, solid));

  for (const auto& cells : hole_cells) {
    if (cells.empty()) continue;
    int x0 = grid.w;
    int y0 = grid.h;
    int x1 = -1;
    int y1 = -1;
    for (const auto& [x, y] : cells) {
      x0 = std::min(x0, x - 1);
      y0 = std::min(y0, y - 1);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
    Grid ring(x1 - x0 + 1, y1 - y0 + 1);
    for (const auto& [x, y] : cells) {
      ring.at(x - x0, y - y0) = 1;
      for (const auto& d : kRing) {
        if (grid.at(x + d[0], y + d[1]) != 0) ring.at(x + d[0] - x0, y + d[1] - y0) = 1;
      }
    }
    std::array<int, 2> start{-1, -1};
    for (int y = 0; y < ring.h && start[0] < 0; ++y) {
      for (int x = 0; x < ring.w; ++x) {
        if (ring.at(x, y) != 0) {
          start = {x, y};
          break;
        }
      }
    }
    std::vector<Vec2> contour;
    for (const auto& c : moore_trace(ring, 1, start)) contour.push_back(to_world({c[0] + x0, c[1] + y0}));
    contours.push_back(std::move(contour));
  }
  return contours;
}

std::vector<Vec2> douglas_peucker(const std::vector<Vec2>& polyline, double epsilon) {
  if (polyline.size() < 3) return polyline;
  std::vector<bool> keep(polyline.size(), false);
  keep.front() = keep.back() = true;
  std::vector<std::array<std::size_t, 2>> stack{{0, polyline.size() - 1}};
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    double worst = -1.0;
    std::size_t worst_idx = a;
    for (std::size_t k = a + 1; k < b; ++k) {
      const double d = point_line_distance(polyline[k], polyline[a], polyline[b]);
      if (d > worst) {
        worst = d;
        worst_idx = k;
      }
    }
    if (worst > epsilon) {
      keep[worst_idx] = true;
      stack.push_back({a, worst_idx});
      stack.push_back({worst_idx, b});
    }
  }
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < polyline.size(); ++k) {
    if (keep[k]) out.push_back(polyline[k]);
  }
  return out;
}

namespace {

struct Line2 {
  Vec2 point = Vec2::Zero();
  Vec2 dir = Vec2::UnitX();
};

// Total least squares line through contour[first..last] (cyclic), trimmed at both ends
// where closing rounds the corners (less on short runs); the chord when too few points remain.
Line2 fit_run(const std::vector<Vec2>& contour, std::size_t first, std::size_t last, std::size_t trim) {
  const std::size_t n = contour.size();
  const std::size_t len = (last + n - first) % n;
  const Vec2 chord = contour[last] - contour[first];
  Line2 line{contour[first], chord.norm() > 0.0 ? Vec2(chord.normalized()) : Vec2::UnitX()};
  while (trim > 0 && len < 2 * trim + 3) --trim;
  if (len < 3) return line;
  Vec2 mean = Vec2::Zero();
  for (std::size_t k = trim; k <= len - trim; ++k) mean += contour[(first + k) % n];
  const double m = static_cast<double>(len - 2 * trim + 1);
  mean /= m;
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (std::size_t k = trim; k <= len - trim; ++k) {
    const Vec2 d = contour[(first + k) % n] - mean;
    c += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
  Vec2 dir = es.eigenvectors().col(1);
  if (dir.dot(chord) < 0.0) dir = -dir;
  return {mean, dir};
}

// Replaces each polygon vertex by the intersection of the lines fitted to its two edges,
// keeping the original vertex when the lines are near parallel or the corner would move
// farther than `max_shift`.
std::vector<Vec2> refine_corners(const std::vector<Vec2>& contour, const std::vector<std::size_t>& at,
                                 double max_shift) {
  const std::size_t m = at.size();
  std::vector<Line2> lines;
  for (std::size_t k = 0; k < m; ++k) lines.push_back(fit_run(contour, at[k], at[(k + 1) % m], 2));
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < m; ++k) {
    const Line2& a = lines[(k + m - 1) % m];
    const Line2& b = lines[k];
    const Vec2 v = contour[at[k]];
    const double det = a.dir.x() * b.dir.y() - a.dir.y() * b.dir.x();
    if (std::abs(det) < std::sin(deg2rad(20.0))) {
      out.push_back(v);
      continue;
    }
    const Vec2 d = b.point - a.point;
    const double s = (d.x() * b.dir.y() - d.y() * b.dir.x()) / det;
    const Vec2 x = a.point + s * a.dir;
    out.push_back((x - v).norm() <= max_shift ? x : v);
  }
  return out;
}

}  // namespace

std::vector<Segment2D> vectorize(const OccupancyRaster& raster, const FloorplanParams& params) {
  std::vector<Segment2D> out;
  const double eps = params.simplify_tolerance_cells * raster.resolution;
  const double gap = params.merge_gap_cells * raster.resolution;
  for (const auto& contour : trace_contours(raster, params.closing_radius, params.min_hole_area)) {
    if (contour.size() < 2) continue;
    // Split the closed contour at the point farthest from its start.
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t k = 0; k < contour.size(); ++k) {
      const double d = (contour[k] - contour[0]).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = k;
      }
    }
    std::vector<Vec2> first(contour.begin(), contour.begin() + static_cast<std::ptrdiff_t>(far) + 1);
    std::vector<Vec2> second(contour.begin() + static_cast<std::ptrdiff_t>(far), contour.end());
    second.push_back(contour.front());
    const auto a = douglas_peucker(first, eps);
    const auto b = douglas_peucker(second, eps);
    std::vector<Vec2> poly(a.begin(), a.end() - 1);
    poly.insert(poly.end(), b.begin(), b.end() - 1);
    if (poly.size() < 2) continue;
    if (poly.size() >= 3) {
      std::vector<std::size_t> at;
      std::size_t k = 0;
      for (const auto& v : poly) {
        while (k < contour.size() && contour[k] != v) ++k;
        at.push_back(k);
      }
      if (k < contour.size()) poly = refine_corners(contour, at, 3.0 * raster.resolution);
    }

    std::vector<Segment2D> edges;
    auto mergeable = [&](const Segment2D& s, const Segment2D& e) {
      const Vec2 ds = s.end - s.start;
      const Vec2 de = e.end - e.start;
      if (ds.norm() < 1e-12 || de.norm() < 1e-12) return true;
      return angle_between_deg(ds, de) < params.merge_angle_deg && (e.start - s.end).norm() < gap;
    };
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Segment2D e{poly[k], poly[(k + 1) % poly.size()], raster.cls};
      if (!edges.empty() && mergeable(edges.back(), e)) {
        edges.back().end = e.end;
      } else {
        edges.push_back(e);
      }
    }
    if (edges.size() > 2 && mergeable(edges.back(), edges.front())) {
      edges.front().start = edges.back().start;
      edges.pop_back();
    }
    for (const auto& e : edges) {
      if (e.length() >= params.min_segment_length) out.push_back(e);
    }
  }
  return out;
}

namespace {

double median_z(const SemanticPointCloud& cloud, SemanticClass cls, double fallback) {
  std::vector<double> z;
  for (const auto& p : cloud.points) {
    if (p.cls == cls) z.push_back(p.position.z());
  }
  if (z.empty()) return fallback;
  const std::size_t mid = z.size() / 2;
  std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(mid), z.end());
  if (z.size() % 2 == 1) return z[mid];
  const double lower = *std::max_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + z[mid]);
}

}  // namespace

FloorplanResult build_floorplan_with_rasters(const SemanticPointCloud& cloud, double floor_z, double ceiling_z,
                                             const FloorplanParams& params) {
  const auto wall_pts = slab_filter(cloud, floor_z, params.half_band, SemanticClass::wall);
  if (wall_pts.empty()) throw Error(ErrorCode::empty_plan, "no wall points within the floor slab");
  const auto column_pts = slab_filter(cloud, floor_z, params.half_band, SemanticClass::column);

  FloorplanResult result;
  result.wall_raster = rasterize(wall_pts, params.resolution, params.min_hits, SemanticClass::wall);
  result.column_raster = rasterize(column_pts, params.resolution, params.min_hits, SemanticClass::column);
  result.plan.segments = vectorize(result.wall_raster, params);
  for (const auto& s : vectorize(result.column_raster, params)) result.plan.segments.push_back(s);
  if (result.plan.segments_of(SemanticClass::wall).empty()) {
    throw Error(ErrorCode::empty_plan, "wall raster produced no segments");
  }
  result.plan.floor = Plane::horizontal(median_z(cloud, SemanticClass::floor, floor_z));
  result.plan.ceiling = Plane::horizontal(median_z(cloud, SemanticClass::ceiling, ceiling_z));
  return result;
}

VectorFloorPlan build_floorplan(const SemanticPointCloud& cloud, double floor_z, double ceiling_z,
                                const FloorplanParams& params) {
  return build_floorplan_with_rasters(cloud, floor_z, ceiling_z, params).plan;
}

VectorFloorPlan exact_footprint_plan(const BuildingScene& scene) {
  VectorFloorPlan plan;
  plan.floor = Plane::horizontal(scene.floor_z);
  plan.ceiling = Plane::horizontal(scene.ceiling_z);
  std::vector<std::array<double, 5>> keys;
  for (const auto& mesh : scene.meshes) {
    if (mesh.cls != SemanticClass::wall && mesh.cls != SemanticClass::column) continue;
    for (const auto& tri : mesh.triangles) {
      const Vec3 n = (tri.b - tri.a).cross(tri.c - tri.a).normalized();
      if (std::abs(n.z()) > 1e-9) continue;
      // The footprint of a vertical triangle is the segment between its extreme vertices.
      const std::array<Vec2, 3> p = {tri.a.head<2>(), tri.b.head<2>(), tri.c.head<2>()};
      std::size_t ia = 0;
      std::size_t ib = 1;
      double best = -1.0;
      for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t y = x + 1; y < 3; ++y) {
          const double d = (p[x] - p[y]).squaredNorm();
          if (d > best) {
            best = d;
            ia = x;
            ib = y;
          }
        }
      }
      if (best < 1e-12) continue;
      Vec2 a = p[ia];
      Vec2 b = p[ib];
      if (b.x() < a.x() || (b.x() == a.x() && b.y() < a.y())) std::swap(a, b);
      const std::array<double, 5> key = {static_cast<double>(mesh.cls), a.x(), a.y(), b.x(), b.y()};
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
      keys.push_back(key);
      plan.segments.push_back({a, b, mesh.cls});
    }
  }
  return plan;
}

}  // namespace bimcap
