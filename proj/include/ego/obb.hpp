#pragma once

// Gravity-aligned oriented bounding boxes: exact 3D IoU, decoding from
// detection grids, NMS and 2D projections.
//
// Boxes live in world coordinates with z up; yaw rotates the box about z.
// dims = (sx, sy, sz) are full extents along the box's local x, y, z axes.

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "ego/camera.hpp"
#include "ego/dual.hpp"
#include "ego/geom.hpp"
#include "ego/voxel.hpp"

namespace ego {

struct Obb3 {
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
  Vec3 dims = Vec3::Ones();
  std::vector<double> class_probs{1.0};
  double score = 1.0;

  /// argmax of class_probs (lowest index on ties).
  int label() const;
  double volume() const { return dims.prod(); }
  Pose pose() const { return Pose(Rotation::about_z(yaw), center); }
  std::array<Vec3, 8> corners() const;
  /// dims > 0, probabilities sum to 1, yaw in [-pi, pi).
  bool is_valid(double tol = 1e-6) const;

  static Obb3 make(const Vec3& center, double yaw, const Vec3& dims, int label, int num_classes,
                   double score = 1.0);
};

/// Axis-aligned 2D box in pixels.
struct Box2 {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  Vec2 center() const { return Vec2(0.5 * (x0 + x1), 0.5 * (y0 + y1)); }
};

/// Per-voxel detection head outputs (or targets).
struct DetectionGrid {
  DenseVolume centerness;      // D x H x W, in [0, 1]
  FeatureVolume class_logits;  // k x D x H x W
  FeatureVolume params;        // 7 x D x H x W: size(3), center offset in voxels(3), yaw(1)

  DetectionGrid() = default;
  DetectionGrid(int num_classes, int D, int H, int W);
  int num_classes() const { return class_logits.C; }
  bool matches(const VoxelGrid& grid) const;
  bool same_shape(const DetectionGrid& o) const;
};

inline constexpr int kParamCount = 7;
inline constexpr double kDefaultCenternessThreshold = 0.2;
inline constexpr int kDefaultNmsRadiusVoxels = 2;

// ---- Box geometry, generic over double and Dual<N> ------------------------

template <typename T>
struct BoxParams {
  T cx, cy, cz, yaw, sx, sy, sz;
};

inline BoxParams<double> box_params(const Obb3& b) {
  return {b.center.x(), b.center.y(), b.center.z(), b.yaw, b.dims.x(), b.dims.y(), b.dims.z()};
}

namespace detail {

template <typename T>
struct P2 {
  T x, y;
};

template <typename T>
struct Poly {
  std::array<P2<T>, 16> p;
  int n = 0;
  void push(const P2<T>& q) {
    if (n < 16) p[n++] = q;
  }
};

template <typename T>
Poly<T> footprint(const BoxParams<T>& b) {
  using std::cos;
  using std::sin;
  const T c = cos(b.yaw), s = sin(b.yaw);
  const T hx = b.sx * T(0.5), hy = b.sy * T(0.5);
  Poly<T> poly;
  const double sgn[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};  // counter-clockwise
  for (const auto& g : sgn) {
    const T lx = hx * T(g[0]), ly = hy * T(g[1]);
    poly.push({b.cx + c * lx - s * ly, b.cy + s * lx + c * ly});
  }
  return poly;
}

template <typename T>
T edge_side(const P2<T>& e0, const P2<T>& e1, const P2<T>& q) {
  return (e1.x - e0.x) * (q.y - e0.y) - (e1.y - e0.y) * (q.x - e0.x);
}

// Sutherland-Hodgman clip of `subject` by the convex CCW polygon `clip`.
template <typename T>
Poly<T> clip_convex(const Poly<T>& subject, const Poly<T>& clip) {
  Poly<T> out = subject;
  for (int e = 0; e < clip.n && out.n > 0; ++e) {
    const P2<T>& e0 = clip.p[e];
    const P2<T>& e1 = clip.p[(e + 1) % clip.n];
    Poly<T> in = out;
    out.n = 0;
    for (int i = 0; i < in.n; ++i) {
      const P2<T>& cur = in.p[i];
      const P2<T>& prev = in.p[(i + in.n - 1) % in.n];
      const T dc = edge_side(e0, e1, cur);
      const T dp = edge_side(e0, e1, prev);
      const bool cin = value_of(dc) >= 0.0, pin = value_of(dp) >= 0.0;
      if (cin != pin) {
        const T t = dp / (dp - dc);
        out.push({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      if (cin) out.push(cur);
    }
  }
  return out;
}

template <typename T>
T polygon_area(const Poly<T>& poly) {
  T a(0.0);
  for (int i = 0; i < poly.n; ++i) {
    const P2<T>& p = poly.p[i];
    const P2<T>& q = poly.p[(i + 1) % poly.n];
    a += p.x * q.y - q.x * p.y;
  }
  a = a * T(0.5);
  return value_of(a) < 0.0 ? -a : a;
}

}  // namespace detail

/// Intersection volume of two gravity-aligned boxes.
template <typename T>
T box_intersection(const BoxParams<T>& a, const BoxParams<T>& b) {
  const T a_top = a.cz + a.sz * T(0.5), a_bot = a.cz - a.sz * T(0.5);
  const T b_top = b.cz + b.sz * T(0.5), b_bot = b.cz - b.sz * T(0.5);
  const T top = value_of(a_top) < value_of(b_top) ? a_top : b_top;
  const T bot = value_of(a_bot) > value_of(b_bot) ? a_bot : b_bot;
  const T h = top - bot;
  if (value_of(h) <= 0.0) return T(0.0);
  const auto inter = detail::clip_convex(detail::footprint(a), detail::footprint(b));
  if (inter.n < 3) return T(0.0);
  return detail::polygon_area(inter) * h;
}

template <typename T>
T box_iou(const BoxParams<T>& a, const BoxParams<T>& b) {
  const T inter = box_intersection(a, b);
  const T uni = a.sx * a.sy * a.sz + b.sx * b.sy * b.sz - inter;
  if (value_of(uni) <= 0.0 || value_of(inter) <= 0.0) return T(0.0);
  T iou = inter / uni;
  if (value_of(iou) > 1.0) iou = T(1.0);
  return iou;
}

/// Exact 3D IoU of gravity-aligned boxes.
double iou3(const Obb3& a, const Obb3& b);

/// Axis-aligned 2D IoU.
double iou2(const Box2& a, const Box2& b);

/// One box per voxel with centerness >= tau_center.
std::vector<Obb3> decode(const DetectionGrid& det, const VoxelGrid& grid,
                         double tau_center = kDefaultCenternessThreshold);

/// Box decoded from the parameters stored at a single voxel.
Obb3 decode_voxel(const DetectionGrid& det, const VoxelGrid& grid, size_t voxel);

/// Greedy NMS: a candidate is suppressed when its center lies within
/// radius_voxels * voxel_size of a kept box AND their IoU exceeds iou_min.
std::vector<Obb3> nms3(const std::vector<Obb3>& dets, const VoxelGrid& grid,
                       int radius_voxels = kDefaultNmsRadiusVoxels, double iou_min = 0.0);

/// Image-clipped hull of the validly projected corners; nullopt if none project.
std::optional<Box2> project_bbox2(const Obb3& obb, const Camera& cam, const Pose& T_w_cam);

/// Numerically stable softmax.
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace ego
