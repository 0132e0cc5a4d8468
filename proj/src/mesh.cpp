#include "ego/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ego/error.hpp"

namespace ego {

double TriangleMesh::face_area(size_t f) const {
  const auto [a, b, c] = triangle(f);
  return 0.5 * (b - a).cross(c - a).norm();
}

void TriangleMesh::append(const TriangleMesh& other) {
  const auto base = static_cast<std::int32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

TriangleMesh TriangleMesh::transformed(const Pose& T) const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v = T * v;
  return out;
}

bool TriangleMesh::indices_valid() const {
  const auto n = static_cast<std::int32_t>(vertices.size());
  return std::all_of(faces.begin(), faces.end(), [n](const auto& f) {
    return f[0] >= 0 && f[1] >= 0 && f[2] >= 0 && f[0] < n && f[1] < n && f[2] < n;
  });
}

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c,
                                   double t_min) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 h = d.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = o - a;
  const double u = inv * s.dot(h);
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = inv * d.dot(q);
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = inv * e2.dot(q);
  if (t <= t_min) return std::nullopt;
  return t;
}

namespace {

constexpr std::int32_t kLeafSize = 4;

bool ray_box(const Eigen::AlignedBox3d& box, const Vec3& o, const Vec3& inv_d, double t0, double t1) {
  for (int a = 0; a < 3; ++a) {
    double tn = (box.min()[a] - o[a]) * inv_d[a];
    double tf = (box.max()[a] - o[a]) * inv_d[a];
    if (tn > tf) std::swap(tn, tf);
    // NaN (0 * inf) means the ray lies on a slab plane; treat as overlapping.
    if (!std::isnan(tn)) t0 = std::max(t0, tn);
    if (!std::isnan(tf)) t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : mesh_(mesh) {
  if (mesh_.empty()) fail(ErrorCode::kEmptyMesh, "cannot build a BVH over an empty mesh");
  if (!mesh_.indices_valid()) fail(ErrorCode::kInvalidArgument, "mesh face index out of range");
  const size_t n = mesh_.faces.size();
  tri_boxes_.resize(n);
  centroids_.resize(n);
  order_.resize(n);
  for (size_t f = 0; f < n; ++f) {
    const auto [a, b, c] = mesh_.triangle(f);
    Eigen::AlignedBox3d box(a);
    box.extend(b);
    box.extend(c);
    tri_boxes_[f] = box;
    centroids_[f] = (a + b + c) / 3.0;
    order_[f] = static_cast<std::int32_t>(f);
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  build(0, static_cast<std::int32_t>(n));
}

std::int32_t TriangleBvh::build(std::int32_t first, std::int32_t count) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d cbox;
  for (std::int32_t i = first; i < first + count; ++i) {
    box.extend(tri_boxes_[order_[i]]);
    cbox.extend(centroids_[order_[i]]);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const std::int32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::int32_t a, std::int32_t b) {
                     if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
                     return a < b;
                   });
  const std::int32_t left = build(first, mid - first);
  const std::int32_t right = build(mid, first + count - mid);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<RayHit> TriangleBvh::raycast(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
  const Vec3 inv_d = dir.cwiseInverse();
  std::optional<RayHit> best;
  double best_t = t_max;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_box(node.box, origin, inv_d, t_min, best_t)) continue;
    if (node.left < 0) {
      for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
        const auto [a, b, c] = mesh_.triangle(order_[i]);
        const auto t = ray_triangle(origin, dir, a, b, c, t_min);
        if (t && *t < best_t) {
          best_t = *t;
          best = RayHit{*t, order_[i]};
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

double TriangleBvh::distance(const Vec3& p) const {
  double best2 = std::numeric_limits<double>::infinity();
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(p) > best2) continue;
    if (node.left < 0) {
      for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
        const auto [a, b, c] = mesh_.triangle(order_[i]);
        best2 = std::min(best2, (p - closest_point_on_triangle(p, a, b, c)).squaredNorm());
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Visit the nearer child first.
    if (dl < dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return std::sqrt(best2);
}

}  // namespace ego
