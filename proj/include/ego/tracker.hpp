#pragma once

// Sequence-level OBB persistence: associate per-snippet detections to scene
// tracks, fuse them by running averages on SE(3), and prune/deduplicate.

#include <array>
#include <limits>
#include <vector>

#include "ego/camera.hpp"
#include "ego/obb.hpp"

namespace ego {

struct TrackerConfig {
  // Weights of (class, 2D center distance, 3D center distance, 2D IoU, 3D IoU).
  std::array<double, 5> w{8.0, 0.0, 1.0, 2.0, 0.0};
  double p_inst = 0.5;
  double p_assoc = 0.45;
  double iou_gate = 0.2;
  int n_min = 2;
  double t_inst = 1.0;
  double dedup_iou3 = 0.1;
  double dedup_iou2 = 0.5;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct TrackedObject {
  int id = 0;
  Obb3 obb;
  int n = 1;
  double t_created = 0.0;
  double t_last = 0.0;
};

struct SceneState {
  std::vector<TrackedObject> tracks;
  double time = -std::numeric_limits<double>::infinity();
  int next_id = 0;
};

/// Camera a snippet's detections are evaluated in (for the 2D cost terms).
struct ViewContext {
  Camera camera;
  Pose T_w_cam;
};

struct AssocTerms {
  double c_class = 0.0, c_bbox2 = 0.0, c_bbox3 = 0.0, c_iou2d = 0.0, c_iou3d = 0.0;
  double iou2 = 0.0, iou3 = 0.0;
  bool both_projected = false;
};

AssocTerms assoc_terms(const TrackedObject& track, const Obb3& det, const ViewContext& view);
double assoc_cost(const TrackedObject& track, const Obb3& det, const ViewContext& view,
                  const std::array<double, 5>& w = TrackerConfig{}.w);

/// Running-average update. If the relative pose is within 1e-6 of a rotation
/// by pi, the pose update is skipped while sizes, classes and count update.
TrackedObject update_track(const TrackedObject& track, const Obb3& det, double t);

/// One Association / Update / Removal / deduplication step.
SceneState step(const SceneState& scene, const std::vector<Obb3>& dets, double t, const ViewContext& view,
                const TrackerConfig& cfg = {});

/// Tracks as scored boxes for evaluation.
std::vector<Obb3> scene_boxes(const SceneState& scene);

}  // namespace ego
