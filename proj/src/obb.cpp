#include "ego/obb.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "ego/error.hpp"

namespace ego {

int Obb3::label() const {
  if (class_probs.empty()) return -1;
  return static_cast<int>(std::max_element(class_probs.begin(), class_probs.end()) - class_probs.begin());
}

std::array<Vec3, 8> Obb3::corners() const {
  const Rotation R = Rotation::about_z(yaw);
  std::array<Vec3, 8> out;
  int n = 0;
  for (int sz : {-1, 1})
    for (int sy : {-1, 1})
      for (int sx : {-1, 1}) out[n++] = center + R * Vec3(0.5 * sx * dims.x(), 0.5 * sy * dims.y(), 0.5 * sz * dims.z());
  return out;
}

bool Obb3::is_valid(double tol) const {
  if (!(dims.minCoeff() > 0.0) || !center.allFinite()) return false;
  if (!(yaw >= -std::numbers::pi && yaw < std::numbers::pi)) return false;
  double sum = 0.0;
  for (double p : class_probs) {
    if (p < -tol) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

Obb3 Obb3::make(const Vec3& center, double yaw, const Vec3& dims, int label, int num_classes, double score) {
  Obb3 b;
  b.center = center;
  b.yaw = wrap_angle(yaw);
  b.dims = dims;
  b.class_probs.assign(static_cast<size_t>(num_classes), 0.0);
  b.class_probs.at(static_cast<size_t>(label)) = 1.0;
  b.score = score;
  return b;
}

DetectionGrid::DetectionGrid(int num_classes, int D, int H, int W)
    : centerness(D, H, W, 0.0), class_logits(num_classes, D, H, W), params(kParamCount, D, H, W) {}

bool DetectionGrid::matches(const VoxelGrid& grid) const {
  return centerness.same_shape(grid.D, grid.H, grid.W) && class_logits.D == grid.D && class_logits.H == grid.H &&
         class_logits.W == grid.W && params.C == kParamCount && params.D == grid.D && params.H == grid.H &&
         params.W == grid.W;
}

bool DetectionGrid::same_shape(const DetectionGrid& o) const {
  return centerness.same_shape(o.centerness) && class_logits.C == o.class_logits.C &&
         class_logits.D == o.class_logits.D && class_logits.H == o.class_logits.H &&
         class_logits.W == o.class_logits.W && params.C == o.params.C && params.D == o.params.D &&
         params.H == o.params.H && params.W == o.params.W;
}

double iou3(const Obb3& a, const Obb3& b) { return box_iou(box_params(a), box_params(b)); }

double iou2(const Box2& a, const Box2& b) {
  const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
  for (double& x : p) x /= sum;
  return p;
}

Obb3 decode_voxel(const DetectionGrid& det, const VoxelGrid& grid, size_t voxel) {
  const VoxelIndex idx = grid.unravel(voxel);
  const auto& P = det.params;
  const Vec3 offset(P.at(3, voxel), P.at(4, voxel), P.at(5, voxel));
  Obb3 b;
  b.center = grid.T_w_grid * (grid.center_grid(idx.i, idx.j, idx.k) + offset * grid.voxel_size);
  b.dims = Vec3(P.at(0, voxel), P.at(1, voxel), P.at(2, voxel));
  b.yaw = wrap_angle(P.at(6, voxel) + grid.yaw());
  std::vector<double> logits(static_cast<size_t>(det.num_classes()));
  for (int c = 0; c < det.num_classes(); ++c) logits[c] = det.class_logits.at(c, voxel);
  b.class_probs = softmax(logits);
  b.score = det.centerness.data[voxel];
  return b;
}

std::vector<Obb3> decode(const DetectionGrid& det, const VoxelGrid& grid, double tau_center) {
  if (!det.matches(grid)) fail(ErrorCode::kShapeMismatch, "detection grid does not match voxel grid");
  std::vector<Obb3> out;
  for (size_t v = 0; v < grid.voxel_count(); ++v) {
    if (det.centerness.data[v] >= tau_center) out.push_back(decode_voxel(det, grid, v));
  }
  return out;
}

std::vector<Obb3> nms3(const std::vector<Obb3>& dets, const VoxelGrid& grid, int radius_voxels, double iou_min) {
  if (radius_voxels < 0) fail(ErrorCode::kInvalidArgument, "NMS radius must be non-negative");
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
  const double radius = radius_voxels * grid.voxel_size;
  std::vector<Obb3> kept;
  for (size_t i : order) {
    const Obb3& cand = dets[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Obb3& k) {
      return (k.center - cand.center).norm() <= radius && iou3(k, cand) > iou_min;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

std::optional<Box2> project_bbox2(const Obb3& obb, const Camera& cam, const Pose& T_w_cam) {
  const Pose T_cam_w = T_w_cam.inverse();
  std::optional<Box2> box;
  for (const Vec3& c : obb.corners()) {
    const Pixel px = project(cam, T_cam_w * c);
    if (!px.valid) continue;
    if (!box) {
      box = Box2{px.u, px.v, px.u, px.v};
    } else {
      box->x0 = std::min(box->x0, px.u);
      box->y0 = std::min(box->y0, px.v);
      box->x1 = std::max(box->x1, px.u);
      box->y1 = std::max(box->y1, px.v);
    }
  }
  if (box) {
    const double w = width_of(cam), h = height_of(cam);
    box->x0 = std::clamp(box->x0, 0.0, w);
    box->x1 = std::clamp(box->x1, 0.0, w);
    box->y0 = std::clamp(box->y0, 0.0, h);
    box->y1 = std::clamp(box->y1, 0.0, h);
  }
  return box;
}

}  // namespace ego
