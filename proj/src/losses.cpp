#include "ego/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ego/dual.hpp"
#include "ego/error.hpp"
#include "ego/rng.hpp"

namespace ego {

void FocalParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::kInvalidArgument, "focal alpha must be in (0, 1)");
  if (!(gamma >= 0.0)) fail(ErrorCode::kInvalidArgument, "focal gamma must be non-negative");
}

void LossWeights::validate() const {
  if (!(w_c >= 0 && w_iou >= 0 && w_cls >= 0 && w_tv >= 0 && delta >= 0)) {
    fail(ErrorCode::kInvalidArgument, "loss weights must be non-negative");
  }
}

double focal_loss(double p, double y, const FocalParams& fp) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);
  const double a = fp.alpha, g = fp.gamma;
  return -(y * a * std::pow(1.0 - p, g) * std::log(p) + (1.0 - y) * (1.0 - a) * std::pow(p, g) * std::log1p(-p));
}

double focal_loss_grad(double p, double y, const FocalParams& fp) {
  if (p < kProbEps || p > 1.0 - kProbEps) return 0.0;
  const double a = fp.alpha, g = fp.gamma, q = 1.0 - p;
  const double pos = g == 0.0 ? 1.0 / p : -g * std::pow(q, g - 1.0) * std::log(p) + std::pow(q, g) / p;
  const double neg = g == 0.0 ? -1.0 / q : g * std::pow(p, g - 1.0) * std::log1p(-p) - std::pow(p, g) / q;
  return -(y * a * pos + (1.0 - y) * (1.0 - a) * neg);
}

DetectionGrid encode_targets(const std::vector<Obb3>& gt_boxes, const VoxelGrid& grid, int num_classes) {
  if (num_classes < 1) fail(ErrorCode::kInvalidArgument, "need at least one class");
  DetectionGrid t(num_classes, grid.D, grid.H, grid.W);
  const Pose T_grid_w = grid.T_w_grid.inverse();
  const double grid_yaw = grid.yaw();
  for (const Obb3& b : gt_boxes) {
    const auto idx = grid.locate(b.center);
    if (!idx) continue;
    const size_t v = grid.linear(idx->i, idx->j, idx->k);
    if (t.centerness.data[v] == 1.0) continue;
    const int label = b.label();
    if (label < 0 || label >= num_classes) fail(ErrorCode::kInvalidArgument, "box class out of range");
    t.centerness.data[v] = 1.0;
    for (int c = 0; c < num_classes; ++c) t.class_logits.at(c, v) = c == label ? kClassLogitSaturation : 0.0;
    const Vec3 offset = (T_grid_w * b.center - grid.center_grid(idx->i, idx->j, idx->k)) / grid.voxel_size;
    for (int a = 0; a < 3; ++a) {
      t.params.at(a, v) = b.dims[a];
      t.params.at(3 + a, v) = offset[a];
    }
    t.params.at(6, v) = wrap_angle(b.yaw - grid_yaw);
  }
  return t;
}

namespace {

using D7 = Dual<kParamCount>;

// Predicted box at voxel v with derivatives wrt its 7 parameters.
BoxParams<D7> pred_box_dual(const DetectionGrid& pred, const VoxelGrid& grid, size_t v) {
  const VoxelIndex idx = grid.unravel(v);
  const Vec3 cg = grid.center_grid(idx.i, idx.j, idx.k);
  const Mat3& R = grid.T_w_grid.rotation.matrix();
  const Vec3& t = grid.T_w_grid.translation;
  D7 p[kParamCount];
  for (int a = 0; a < kParamCount; ++a) p[a] = D7::variable(pred.params.at(a, v), a);
  D7 c[3];
  for (int r = 0; r < 3; ++r) {
    c[r] = D7(t[r]);
    for (int a = 0; a < 3; ++a) c[r] += D7(R(r, a)) * (D7(cg[a]) + p[3 + a] * D7(grid.voxel_size));
  }
  return {c[0], c[1], c[2], p[6] + D7(grid.yaw()), p[0], p[1], p[2]};
}

}  // namespace

DetectionLoss detection_loss(const DetectionGrid& pred, const DetectionGrid& target, const VoxelGrid& grid,
                             const LossWeights& w, const FocalParams& fp) {
  if (!pred.same_shape(target) || !pred.matches(grid)) {
    fail(ErrorCode::kShapeMismatch, "prediction, target and grid shapes differ");
  }
  w.validate();
  fp.validate();
  DetectionLoss out;
  out.grad = DetectionGrid(pred.num_classes(), grid.D, grid.H, grid.W);
  const size_t nv = grid.voxel_count();
  const double inv_n = 1.0 / static_cast<double>(nv);
  const int K = pred.num_classes();
  std::vector<double> logits(static_cast<size_t>(K)), dfl(static_cast<size_t>(K));
  double total = 0.0;
  for (size_t v = 0; v < nv; ++v) {
    const double pc = pred.centerness.data[v], yc = target.centerness.data[v];
    total += w.w_c * focal_loss(pc, yc, fp);
    out.grad.centerness.data[v] = w.w_c * inv_n * focal_loss_grad(pc, yc, fp);
    if (yc != 1.0) continue;
    ++out.positives;

    const Obb3 gt = decode_voxel(target, grid, v);
    const BoxParams<double> g = box_params(gt);
    const BoxParams<D7> gd{g.cx, g.cy, g.cz, g.yaw, g.sx, g.sy, g.sz};
    const D7 iou = box_iou(pred_box_dual(pred, grid, v), gd);
    total += w.w_iou * (1.0 - iou.v);
    for (int a = 0; a < kParamCount; ++a) out.grad.params.at(a, v) = -w.w_iou * inv_n * iou.d[a];

    for (int c = 0; c < K; ++c) logits[c] = pred.class_logits.at(c, v);
    const std::vector<double> s = softmax(logits);
    const int label = gt.label();
    for (int c = 0; c < K; ++c) {
      const double y = c == label ? 1.0 : 0.0;
      total += w.w_cls * focal_loss(s[c], y, fp);
      dfl[c] = focal_loss_grad(s[c], y, fp);
    }
    // Softmax Jacobian: ds_c/dz_j = s_c (delta_cj - s_j).
    double sum_ds = 0.0;
    for (int c = 0; c < K; ++c) sum_ds += dfl[c] * s[c];
    for (int j = 0; j < K; ++j) out.grad.class_logits.at(j, v) = w.w_cls * inv_n * s[j] * (dfl[j] - sum_ds);
  }
  out.value = total * inv_n;
  return out;
}

VolumeLoss occupancy_loss(const DenseVolume& pred_occ, const VoxelGrid& grid, const DepthMap& depth,
                          const Camera& cam, const Pose& T_w_cam, const LossWeights& w, const FocalParams& fp,
                          std::uint64_t seed) {
  if (!pred_occ.same_shape(grid.D, grid.H, grid.W)) fail(ErrorCode::kShapeMismatch, "occupancy does not match grid");
  if (depth.width != width_of(cam) || depth.height != height_of(cam)) {
    fail(ErrorCode::kShapeMismatch, "depth map size does not match camera");
  }
  w.validate();
  fp.validate();
  const double delta = w.delta > 0.0 ? w.delta : grid.voxel_size;
  const bool pinhole = std::holds_alternative<PinholeCamera>(cam);
  VolumeLoss out;
  out.grad = DenseVolume(grid.D, grid.H, grid.W, 0.0);
  Rng rng(seed);
  double total = 0.0;
  struct Sample {
    TrilinearStencil st;
    double target;
  };
  std::vector<Sample> used;
  for (int row = 0; row < depth.height; ++row) {
    for (int col = 0; col < depth.width; ++col) {
      const float d = depth.at(col, row);
      if (!DepthMap::is_valid_depth(d)) continue;
      const double u_free = rng.uniform(), u_occ = rng.uniform();
      const Vec3 ray = pixel_ray(cam, Pixel{col + 0.5, row + 0.5, true});
      const double s = pinhole ? d / ray.z() : d;
      const double dist[3] = {s - delta * (1.0 - u_free), s, s + delta * (1.0 - u_occ)};
      Sample trip[3];
      bool ok = true;
      for (int m = 0; m < 3 && ok; ++m) {
        const auto st = trilinear_stencil(grid, T_w_cam * (ray * dist[m]));
        if (!st) {
          ok = false;
        } else {
          trip[m] = {*st, 0.5 * m};
        }
      }
      if (!ok) continue;
      used.insert(used.end(), trip, trip + 3);
      ++out.samples;
    }
  }
  if (out.samples == 0) fail(ErrorCode::kNoValidSamples, "no depth ray produced an in-grid sample triple");
  const double inv_n = 1.0 / static_cast<double>(out.samples);
  for (const Sample& smp : used) {
    double val = 0.0;
    for (int c = 0; c < 8; ++c) val += smp.st.w[c] * pred_occ.data[smp.st.idx[c]];
    total += focal_loss(val, smp.target, fp);
    const double g = focal_loss_grad(val, smp.target, fp) * inv_n;
    for (int c = 0; c < 8; ++c) out.grad.data[smp.st.idx[c]] += g * smp.st.w[c];
  }
  out.value = total * inv_n;
  return out;
}

VolumeLoss tv_loss(const DenseVolume& vol) {
  if (vol.D < 2 || vol.H < 2 || vol.W < 2) fail(ErrorCode::kVolumeTooSmall, "TV loss needs at least 2 voxels per axis");
  VolumeLoss out;
  out.grad = DenseVolume(vol.D, vol.H, vol.W, 0.0);
  const int dims[3] = {vol.D, vol.H, vol.W};
  for (int axis = 0; axis < 3; ++axis) {
    const size_t count = vol.size() / dims[axis] * (dims[axis] - 1);
    const double inv = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (int i = 0; i < vol.D; ++i) {
      for (int j = 0; j < vol.H; ++j) {
        for (int k = 0; k < vol.W; ++k) {
          int i1 = i, j1 = j, k1 = k;
          if (axis == 0) ++i1;
          if (axis == 1) ++j1;
          if (axis == 2) ++k1;
          if (i1 >= vol.D || j1 >= vol.H || k1 >= vol.W) continue;
          const size_t a = vol.index(i, j, k), b = vol.index(i1, j1, k1);
          const double diff = vol.data[b] - vol.data[a];
          const double r = std::sqrt(diff * diff + kTvEps * kTvEps);
          sum += r - kTvEps;
          const double g = diff / r * inv;
          out.grad.data[b] += g;
          out.grad.data[a] -= g;
        }
      }
    }
    out.value += sum * inv;
    out.samples += count;
  }
  return out;
}

}  // namespace ego
