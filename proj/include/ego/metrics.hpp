#pragma once

// Benchmark scoring: mesh-to-mesh surface metrics and multi-threshold 3D
// detection mAP.

#include <cstdint>
#include <map>
#include <vector>

#include "ego/mesh.hpp"
#include "ego/obb.hpp"

namespace ego {

inline constexpr int kDefaultSurfaceSamples = 10000;
inline constexpr double kDefaultSurfaceTau = 0.05;
inline constexpr std::uint64_t kDefaultSampleSeed = 0;
/// Point-to-mesh distances below this (m) are reported as exactly 0.
inline constexpr double kDistanceResolution = 1e-12;

/// Area-weighted uniform samples on the mesh surface. Throws EmptyMesh.
std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed = kDefaultSampleSeed);

/// Exact distance from each point to the closest face. Throws EmptyMesh.
std::vector<double> point_mesh_dist(const std::vector<Vec3>& points, const TriangleMesh& mesh);
std::vector<double> point_mesh_dist(const std::vector<Vec3>& points, const TriangleBvh& bvh);

struct SurfaceMetrics {
  double acc = 0.0;    // mean distance from prediction samples to gt
  double comp = 0.0;   // mean distance from gt samples to prediction
  double prec = 0.0;   // fraction of prediction samples closer than tau
  double recal = 0.0;  // fraction of gt samples closer than tau
};

/// Both meshes are sampled with `seed` (pred) and `seed + 1` (gt).
SurfaceMetrics surface_metrics(const TriangleMesh& pred, const TriangleMesh& gt, int n = kDefaultSurfaceSamples,
                               double tau = kDefaultSurfaceTau, std::uint64_t seed = kDefaultSampleSeed);

/// Accuracy-only variant for predictions without faces (comp and recal stay 0).
SurfaceMetrics accuracy_metrics(const std::vector<Vec3>& pred_points, const TriangleMesh& gt,
                                double tau = kDefaultSurfaceTau);

/// [0.0, 0.05, ..., 0.5].
std::vector<double> default_iou_thresholds();

struct DetectionMetrics {
  double map = 0.0;
  std::vector<double> thresholds;
  /// class -> AP at each threshold; only classes with at least one gt box.
  std::map<int, std::vector<double>> per_class_ap;
  /// mAP at each threshold (mean over classes).
  std::vector<double> map_at() const;
};

/// Detections carry score and class (label()) inside Obb3. Threshold 0 means
/// IoU > 0; any other threshold t means IoU >= t.
DetectionMetrics average_precision(const std::vector<Obb3>& dets, const std::vector<Obb3>& gts,
                                   const std::vector<double>& iou_thresholds = default_iou_thresholds());

/// Area under the all-points-interpolated precision-recall curve for a
/// score-ordered TP/FP sequence.
double ap_from_matches(const std::vector<char>& is_tp, int num_gt);

}  // namespace ego
