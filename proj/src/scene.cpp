#include "bimcap/scene.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "bimcap/error.hpp"
#include "bimcap/log.hpp"
#include "format_util.hpp"

namespace bimcap {
namespace {

struct Box {
  double x0, x1, y0, y1;
};

bool same_box(const Box& a, const Box& b) {
  constexpr double kTol = 1e-9;
  return std::abs(a.x0 - b.x0) < kTol && std::abs(a.x1 - b.x1) < kTol &&
         std::abs(a.y0 - b.y0) < kTol && std::abs(a.y1 - b.y1) < kTol;
}

void add_quad(std::vector<Triangle>& out, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  out.push_back({a, b, c});
  out.push_back({a, c, d});
}

// Four vertical faces, outward CCW winding.
void add_box_sides(std::vector<Triangle>& out, const Box& b, double z0, double z1) {
  const Vec3 p00(b.x0, b.y0, z0), p10(b.x1, b.y0, z0), p11(b.x1, b.y1, z0), p01(b.x0, b.y1, z0);
  const Vec3 q00(b.x0, b.y0, z1), q10(b.x1, b.y0, z1), q11(b.x1, b.y1, z1), q01(b.x0, b.y1, z1);
  add_quad(out, p00, p10, q10, q00);  // -y
  add_quad(out, p10, p11, q11, q10);  // +x
  add_quad(out, p11, p01, q01, q11);  // +y
  add_quad(out, p01, p00, q00, q01);  // -x
}

void add_box(std::vector<Triangle>& out, const Box& b, double z0, double z1) {
  add_box_sides(out, b, z0, z1);
  add_quad(out, {b.x0, b.y0, z0}, {b.x0, b.y1, z0}, {b.x1, b.y1, z0}, {b.x1, b.y0, z0});  // bottom
  add_quad(out, {b.x0, b.y0, z1}, {b.x1, b.y0, z1}, {b.x1, b.y1, z1}, {b.x0, b.y1, z1});  // top
}

std::vector<Box> split_for_door(const Box& box, const SceneSpec::Door& door) {
  constexpr double kTol = 1e-9;
  const bool inside = door.x >= box.x0 - kTol && door.x <= box.x1 + kTol && door.y >= box.y0 - kTol &&
                      door.y <= box.y1 + kTol;
  if (!inside) return {box};
  std::vector<Box> out;
  const double half = 0.5 * door.width;
  if (box.x1 - box.x0 >= box.y1 - box.y0) {
    if (door.x - half - box.x0 > 1e-6) out.push_back({box.x0, door.x - half, box.y0, box.y1});
    if (box.x1 - (door.x + half) > 1e-6) out.push_back({door.x + half, box.x1, box.y0, box.y1});
  } else {
    if (door.y - half - box.y0 > 1e-6) out.push_back({box.x0, box.x1, box.y0, door.y - half});
    if (box.y1 - (door.y + half) > 1e-6) out.push_back({box.x0, box.x1, door.y + half, box.y1});
  }
  return out;
}

std::string numbered_id(std::string_view prefix, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", index);
  return std::string(prefix) + "_" + buf;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

struct ObjContent {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

ObjContent parse_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read OBJ file " + path.string());
  ObjContent obj;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      std::array<double, 3> xyz{};
      for (double& c : xyz) {
        std::string tok;
        if (!(ss >> tok) || !detail::parse_double(tok, c)) fail("malformed vertex");
      }
      obj.vertices.emplace_back(xyz[0], xyz[1], xyz[2]);
    } else if (tag == "f") {
      std::vector<std::size_t> idx;
      std::string tok;
      while (ss >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long value = 0;
        const auto res = std::from_chars(head.data(), head.data() + head.size(), value);
        if (res.ec != std::errc() || res.ptr != head.data() + head.size()) fail("malformed face index");
        if (value <= 0) fail("negative or zero face indices are not supported");
        if (static_cast<std::size_t>(value) > obj.vertices.size()) fail("face index out of range");
        idx.push_back(static_cast<std::size_t>(value - 1));
      }
      if (idx.size() < 3) fail("face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        obj.triangles.push_back({obj.vertices[idx[0]], obj.vertices[idx[k]], obj.vertices[idx[k + 1]]});
      }
    }
  }
  return obj;
}

}  // namespace

void BuildingScene::validate() const {
  if (!(ceiling_z > floor_z)) throw Error(ErrorCode::invalid_scene, "ceiling_z must exceed floor_z");
  bool has_wall = false;
  bool has_floor = false;
  for (const auto& m : meshes) {
    has_wall = has_wall || m.cls == SemanticClass::wall;
    has_floor = has_floor || m.cls == SemanticClass::floor;
    for (const auto& t : m.triangles) {
      if (!t.a.allFinite() || !t.b.allFinite() || !t.c.allFinite()) {
        throw Error(ErrorCode::invalid_scene, "non-finite vertex in entity " + m.entity_id);
      }
      if (!(t.area() > kMinTriangleArea)) {
        throw Error(ErrorCode::invalid_scene, "degenerate triangle in entity " + m.entity_id);
      }
    }
  }
  if (!has_floor) throw Error(ErrorCode::invalid_scene, "scene has no floor mesh");
  if (!has_wall) throw Error(ErrorCode::invalid_scene, "scene has no wall mesh");
}

std::size_t BuildingScene::triangle_count() const {
  std::size_t n = 0;
  for (const auto& m : meshes) n += m.triangles.size();
  return n;
}

std::pair<Vec2, Vec2> BuildingScene::footprint_bounds() const {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& m : meshes) {
    for (const auto& t : m.triangles) {
      for (const Vec3* p : {&t.a, &t.b, &t.c}) {
        lo = lo.cwiseMin(p->head<2>());
        hi = hi.cwiseMax(p->head<2>());
      }
    }
  }
  return {lo, hi};
}

std::vector<Vec3> SemanticPointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.position);
  return out;
}

SemanticPointCloud SemanticPointCloud::filtered(SemanticClass cls) const {
  SemanticPointCloud out;
  for (const auto& p : points) {
    if (p.cls == cls) out.points.push_back(p);
  }
  return out;
}

BuildingScene generate_scene(const SceneSpec& spec) {
  if (spec.rooms.empty()) throw Error(ErrorCode::invalid_spec, "scene spec has no rooms");
  if (!(spec.wall_thickness > 0.0)) throw Error(ErrorCode::invalid_spec, "wall_thickness must be positive");
  if (!(spec.ceiling_z > spec.floor_z)) throw Error(ErrorCode::invalid_spec, "ceiling_z must exceed floor_z");
  const double t = spec.wall_thickness;

  std::vector<Box> walls;
  auto add_wall = [&](const Box& b) {
    for (const auto& w : walls) {
      if (same_box(w, b)) return;
    }
    walls.push_back(b);
  };
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& r : spec.rooms) {
    if (!(r.w > 0.0) || !(r.h > 0.0)) throw Error(ErrorCode::invalid_spec, "room with zero area");
    add_wall({r.x - t, r.x + r.w + t, r.y - t, r.y});
    add_wall({r.x - t, r.x + r.w + t, r.y + r.h, r.y + r.h + t});
    add_wall({r.x - t, r.x, r.y, r.y + r.h});
    add_wall({r.x + r.w, r.x + r.w + t, r.y, r.y + r.h});
    lo = lo.cwiseMin(Vec2(r.x - t, r.y - t));
    hi = hi.cwiseMax(Vec2(r.x + r.w + t, r.y + r.h + t));
  }
  for (const auto& door : spec.doors) {
    if (!(door.width > 0.0)) throw Error(ErrorCode::invalid_spec, "door width must be positive");
    std::vector<Box> next;
    for (const auto& w : walls) {
      for (const auto& piece : split_for_door(w, door)) next.push_back(piece);
    }
    walls = std::move(next);
  }

  BuildingScene scene;
  scene.floor_z = spec.floor_z;
  scene.ceiling_z = spec.ceiling_z;
  for (std::size_t k = 0; k < walls.size(); ++k) {
    SemanticMesh m{{}, SemanticClass::wall, numbered_id("wall", k)};
    add_box(m.triangles, walls[k], spec.floor_z, spec.ceiling_z);
    scene.meshes.push_back(std::move(m));
  }
  for (std::size_t k = 0; k < spec.columns.size(); ++k) {
    const auto& c = spec.columns[k];
    if (!(c.size > 0.0)) throw Error(ErrorCode::invalid_spec, "column size must be positive");
    const double h = 0.5 * c.size;
    SemanticMesh m{{}, SemanticClass::column, numbered_id("column", k)};
    add_box_sides(m.triangles, {c.x - h, c.x + h, c.y - h, c.y + h}, spec.floor_z, spec.ceiling_z);
    scene.meshes.push_back(std::move(m));
  }
  SemanticMesh floor{{}, SemanticClass::floor, numbered_id("floor", 0)};
  add_quad(floor.triangles, {lo.x(), lo.y(), spec.floor_z}, {hi.x(), lo.y(), spec.floor_z},
           {hi.x(), hi.y(), spec.floor_z}, {lo.x(), hi.y(), spec.floor_z});
  scene.meshes.push_back(std::move(floor));
  SemanticMesh ceiling{{}, SemanticClass::ceiling, numbered_id("ceiling", 0)};
  add_quad(ceiling.triangles, {lo.x(), lo.y(), spec.ceiling_z}, {lo.x(), hi.y(), spec.ceiling_z},
           {hi.x(), hi.y(), spec.ceiling_z}, {hi.x(), lo.y(), spec.ceiling_z});
  scene.meshes.push_back(std::move(ceiling));

  std::stable_sort(scene.meshes.begin(), scene.meshes.end(),
                   [](const SemanticMesh& a, const SemanticMesh& b) { return a.entity_id < b.entity_id; });
  scene.validate();
  return scene;
}

BuildingScene ingest_obj_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".obj") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  BuildingScene scene;
  std::vector<double> floor_z;
  std::vector<double> ceiling_z;
  double max_z = -std::numeric_limits<double>::infinity();
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const std::string prefix = stem.substr(0, stem.find('_'));
    auto cls = parse_class(prefix);
    if (!cls || prefix == "clutter") {
      if (!cls) log::warn("unknown class '" + prefix + "' in " + file.filename().string() + ", using other");
      cls = SemanticClass::other;
    }
    ObjContent obj = parse_obj(file);
    if (obj.triangles.empty()) {
      log::warn("OBJ file without faces skipped: " + file.filename().string());
      continue;
    }
    SemanticMesh mesh{{}, *cls, stem};
    for (const auto& tri : obj.triangles) {
      if (tri.area() > kMinTriangleArea) {
        mesh.triangles.push_back(tri);
      } else {
        log::warn("degenerate triangle dropped in " + file.filename().string());
      }
    }
    for (const auto& v : obj.vertices) {
      max_z = std::max(max_z, v.z());
      if (*cls == SemanticClass::floor) floor_z.push_back(v.z());
      if (*cls == SemanticClass::ceiling) ceiling_z.push_back(v.z());
    }
    if (!mesh.triangles.empty()) scene.meshes.push_back(std::move(mesh));
  }
  if (floor_z.empty()) throw Error(ErrorCode::invalid_scene, "no floor mesh in " + dir.string());
  scene.floor_z = median(floor_z);
  scene.ceiling_z = ceiling_z.empty() ? max_z : median(ceiling_z);
  scene.validate();
  return scene;
}

void export_obj_directory(const BuildingScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& mesh : scene.meshes) {
    const auto path = dir / (mesh.entity_id + ".obj");
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << "# entity " << mesh.entity_id << '\n';
    for (const auto& t : mesh.triangles) {
      for (const Vec3* p : {&t.a, &t.b, &t.c}) {
        out << "v " << detail::fmt_double(p->x()) << ' ' << detail::fmt_double(p->y()) << ' '
            << detail::fmt_double(p->z()) << '\n';
      }
    }
    for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
      out << "f " << 3 * k + 1 << ' ' << 3 * k + 2 << ' ' << 3 * k + 3 << '\n';
    }
    if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
  }
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SemanticPointCloud sample_uniform(const BuildingScene& scene, double density, std::uint64_t seed) {
  if (!(density > 0.0)) throw Error(ErrorCode::invalid_argument, "sampling density must be positive");
  std::vector<std::size_t> order(scene.meshes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scene.meshes[a].entity_id < scene.meshes[b].entity_id;
  });

  SemanticPointCloud cloud;
  for (std::size_t mi : order) {
    const auto& mesh = scene.meshes[mi];
    std::mt19937_64 rng(mix_seed(seed, fnv1a(mesh.entity_id)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& tri : mesh.triangles) {
      const double expected = tri.area() * density;
      const double whole = std::floor(expected);
      auto count = static_cast<std::size_t>(whole);
      if (unit(rng) < expected - whole) ++count;
      const Vec3 e1 = tri.b - tri.a;
      const Vec3 e2 = tri.c - tri.a;
      for (std::size_t k = 0; k < count; ++k) {
        double r1 = unit(rng);
        double r2 = unit(rng);
        if (r1 + r2 > 1.0) {
          r1 = 1.0 - r1;
          r2 = 1.0 - r2;
        }
        cloud.points.push_back({tri.a + r1 * e1 + r2 * e2, mesh.cls});
      }
    }
  }
  return cloud;
}

}  // namespace bimcap
