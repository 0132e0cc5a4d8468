#pragma once

// Training objectives as plain functions with analytic gradients: focal loss,
// the detection loss over DetectionGrids, the surface occupancy loss and a
// total-variation regularizer.

#include <cstdint>
#include <vector>

#include "ego/camera.hpp"
#include "ego/image.hpp"
#include "ego/obb.hpp"
#include "ego/voxel.hpp"

namespace ego {

inline constexpr double kProbEps = 1e-7;
/// Target class logit for the true class; softmax of 20 * one-hot is within
/// 1e-8 of one-hot for any practical class count.
inline constexpr double kClassLogitSaturation = 20.0;
inline constexpr double kTvEps = 1e-8;

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  void validate() const;
};

struct LossWeights {
  double w_c = 100.0;
  double w_iou = 10.0;
  double w_cls = 1.0;
  double w_tv = 0.01;
  /// Sampling band around the surface in meters; <= 0 means one voxel.
  double delta = 0.0;
  void validate() const;
};

/// Binary focal loss with soft target y; p is clamped to [kProbEps, 1 - kProbEps].
double focal_loss(double p, double y, const FocalParams& fp = {});
/// dFL/dp; zero where the clamp is active.
double focal_loss_grad(double p, double y, const FocalParams& fp = {});

/// Centerness 1 at the voxel holding each box center; params hold dims, the
/// sub-voxel offset (in voxels) and the yaw relative to the grid heading.
/// Boxes centered outside the grid are dropped; the first box wins a voxel.
DetectionGrid encode_targets(const std::vector<Obb3>& gt_boxes, const VoxelGrid& grid, int num_classes);

struct DetectionLoss {
  double value = 0.0;
  DetectionGrid grad;  // d value / d pred, same layout as pred
  int positives = 0;
};

/// Centerness focal loss over all voxels plus (1 - IoU) and per-class focal
/// terms at target-positive voxels, all divided by the voxel count.
DetectionLoss detection_loss(const DetectionGrid& pred, const DetectionGrid& target, const VoxelGrid& grid,
                             const LossWeights& w = {}, const FocalParams& fp = {});

struct VolumeLoss {
  double value = 0.0;
  DenseVolume grad;
  size_t samples = 0;
};

/// Free / surface / occupied samples along every valid depth ray, supervised
/// with targets 0, 0.5 and 1. A pixel's triple is dropped when any of its
/// samples falls outside the grid. Throws NoValidSamples if nothing remains.
VolumeLoss occupancy_loss(const DenseVolume& pred_occ, const VoxelGrid& grid, const DepthMap& depth,
                          const Camera& cam, const Pose& T_w_cam, const LossWeights& w = {},
                          const FocalParams& fp = {}, std::uint64_t seed = 0);

/// Sum over the three axes of the mean smoothed absolute forward difference,
/// sqrt(d^2 + eps^2) - eps. Throws VolumeTooSmall unless D, H, W >= 2.
VolumeLoss tv_loss(const DenseVolume& vol);

}  // namespace ego
