#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bimcap/geometry.hpp"
#include "bimcap/semantic.hpp"

namespace bimcap {

struct Triangle {
  Vec3 a;
  Vec3 b;
  Vec3 c;

  [[nodiscard]] double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
};

inline constexpr double kMinTriangleArea = 1e-12;

struct SemanticMesh {
  std::vector<Triangle> triangles;
  SemanticClass cls = SemanticClass::other;
  std::string entity_id;
};

struct BuildingScene {
  std::vector<SemanticMesh> meshes;
  double floor_z = 0.0;
  double ceiling_z = 0.0;

  // Throws invalid_scene on a missing wall/floor mesh, ceiling below floor or bad triangles.
  void validate() const;
  [[nodiscard]] std::size_t triangle_count() const;
  // XY bounding box over all mesh vertices: (min, max).
  [[nodiscard]] std::pair<Vec2, Vec2> footprint_bounds() const;
};

struct LabeledPoint {
  Vec3 position;
  SemanticClass cls = SemanticClass::other;
};

struct SemanticPointCloud {
  std::vector<LabeledPoint> points;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] std::vector<Vec3> positions() const;
  [[nodiscard]] SemanticPointCloud filtered(SemanticClass cls) const;
};

// Desk-scale building description. Rooms are free-space rectangles; walls are placed
// outside each rectangle with the given thickness. Doors cut full-height gaps into any
// wall whose footprint contains the door center.
struct SceneSpec {
  struct Room {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
  };
  struct Column {
    double x = 0.0;
    double y = 0.0;
    double size = 0.0;
  };
  struct Door {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
  };

  std::vector<Room> rooms;
  double wall_thickness = 0.1;
  double floor_z = 0.0;
  double ceiling_z = 2.5;
  std::vector<Column> columns;
  std::vector<Door> doors;
};

BuildingScene generate_scene(const SceneSpec& spec);

// Ingests one OBJ per entity; the filename prefix before the first underscore names the class.
BuildingScene ingest_obj_directory(const std::filesystem::path& dir);

// Writes `<entity_id>.obj` per mesh, preserving triangle and vertex order exactly.
void export_obj_directory(const BuildingScene& scene, const std::filesystem::path& dir);

// Area-uniform sampling with stochastic rounding of the per-triangle expected count.
SemanticPointCloud sample_uniform(const BuildingScene& scene, double density, std::uint64_t seed);

// Stable 64-bit FNV-1a, used to derive per-entity seeds.
std::uint64_t fnv1a(std::string_view text);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace bimcap
