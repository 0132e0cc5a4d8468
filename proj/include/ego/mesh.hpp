#pragma once

// Triangle meshes and a bounding-volume hierarchy for ray casting and
// closest-point queries.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "ego/geom.hpp"

namespace ego {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> faces;

  bool empty() const { return faces.empty(); }
  std::array<Vec3, 3> triangle(size_t f) const {
    return {vertices[faces[f][0]], vertices[faces[f][1]], vertices[faces[f][2]]};
  }
  double face_area(size_t f) const;
  /// Appends another mesh, re-indexing its faces.
  void append(const TriangleMesh& other);
  TriangleMesh transformed(const Pose& T) const;
  /// True if every face index is in range.
  bool indices_valid() const;
};

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Moller-Trumbore; returns the ray parameter t > t_min of the hit.
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                   const Vec3& c, double t_min = 1e-9);

struct RayHit {
  double t = 0.0;
  std::int32_t face = -1;
};

class TriangleBvh {
 public:
  explicit TriangleBvh(const TriangleMesh& mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  /// Nearest hit along origin + t * dir, t in (t_min, t_max).
  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir, double t_min = 1e-9,
                                double t_max = 1e30) const;
  /// Exact distance from p to the closest triangle.
  double distance(const Vec3& p) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::int32_t left = -1, right = -1;  // children, or -1 for a leaf
    std::int32_t first = 0, count = 0;   // leaf range in order_
  };

  std::int32_t build(std::int32_t first, std::int32_t count);

  TriangleMesh mesh_;
  std::vector<Eigen::AlignedBox3d> tri_boxes_;
  std::vector<Vec3> centroids_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace ego
