#include "ego/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ego/error.hpp"
#include "ego/parallel.hpp"
#include "ego/rng.hpp"

namespace ego {

std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  if (mesh.empty()) fail(ErrorCode::kEmptyMesh, "cannot sample an empty mesh");
  if (n < 0) fail(ErrorCode::kInvalidArgument, "sample count must be non-negative");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) cdf[f] = total += mesh.face_area(f);
  if (!(total > 0.0)) fail(ErrorCode::kEmptyMesh, "mesh has zero surface area");
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    const double pick = rng.uniform() * total;
    const size_t f = std::min<size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(), cdf.size() - 1);
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    const auto [a, b, c] = mesh.triangle(f);
    out.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return out;
}

std::vector<double> point_mesh_dist(const std::vector<Vec3>& points, const TriangleBvh& bvh) {
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](size_t b, size_t e) {
    for (size_t i = b; i < e; ++i) {
      d[i] = bvh.distance(points[i]);
      // Samples on the surface itself differ from it only by roundoff.
      if (d[i] < kDistanceResolution) d[i] = 0.0;
    }
  });
  return d;
}

std::vector<double> point_mesh_dist(const std::vector<Vec3>& points, const TriangleMesh& mesh) {
  return point_mesh_dist(points, TriangleBvh(mesh));
}

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double fraction_below(const std::vector<double>& v, double tau) {
  if (v.empty()) return 0.0;
  return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < tau; })) /
         static_cast<double>(v.size());
}

}  // namespace

SurfaceMetrics surface_metrics(const TriangleMesh& pred, const TriangleMesh& gt, int n, double tau,
                               std::uint64_t seed) {
  if (pred.empty() || gt.empty()) fail(ErrorCode::kEmptyMesh, "surface metrics need two non-empty meshes");
  const auto d_pred = point_mesh_dist(sample_mesh(pred, n, seed), TriangleBvh(gt));
  const auto d_gt = point_mesh_dist(sample_mesh(gt, n, seed + 1), TriangleBvh(pred));
  return {mean(d_pred), mean(d_gt), fraction_below(d_pred, tau), fraction_below(d_gt, tau)};
}

SurfaceMetrics accuracy_metrics(const std::vector<Vec3>& pred_points, const TriangleMesh& gt, double tau) {
  const auto d = point_mesh_dist(pred_points, gt);
  SurfaceMetrics m;
  m.acc = mean(d);
  m.prec = fraction_below(d, tau);
  return m;
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back(i / 20.0);
  return t;
}

std::vector<double> DetectionMetrics::map_at() const {
  std::vector<double> out(thresholds.size(), 0.0);
  if (per_class_ap.empty()) return out;
  for (const auto& [cls, aps] : per_class_ap) {
    for (size_t t = 0; t < out.size(); ++t) out[t] += aps[t];
  }
  for (double& x : out) x /= static_cast<double>(per_class_ap.size());
  return out;
}

double ap_from_matches(const std::vector<char>& is_tp, int num_gt) {
  if (num_gt <= 0) return 0.0;
  const size_t n = is_tp.size();
  std::vector<double> prec(n), rec(n);
  double tp = 0.0;
  for (size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1.0 : 0.0;
    prec[i] = tp / static_cast<double>(i + 1);
    rec[i] = tp / num_gt;
  }
  for (size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0, prev_rec = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ap += (rec[i] - prev_rec) * prec[i];
    prev_rec = rec[i];
  }
  return ap;
}

DetectionMetrics average_precision(const std::vector<Obb3>& dets, const std::vector<Obb3>& gts,
                                   const std::vector<double>& iou_thresholds) {
  if (!std::is_sorted(iou_thresholds.begin(), iou_thresholds.end())) {
    fail(ErrorCode::kInvalidArgument, "IoU thresholds must be ascending");
  }
  DetectionMetrics out;
  out.thresholds = iou_thresholds;
  std::map<int, std::vector<size_t>> gt_by_class, det_by_class;
  for (size_t g = 0; g < gts.size(); ++g) gt_by_class[gts[g].label()].push_back(g);
  for (size_t d = 0; d < dets.size(); ++d) det_by_class[dets[d].label()].push_back(d);

  for (const auto& [cls, gidx] : gt_by_class) {
    std::vector<size_t> didx = det_by_class[cls];
    std::stable_sort(didx.begin(), didx.end(), [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
    // IoU table, computed once for all thresholds.
    std::vector<double> iou(didx.size() * gidx.size());
    for (size_t a = 0; a < didx.size(); ++a)
      for (size_t b = 0; b < gidx.size(); ++b) iou[a * gidx.size() + b] = iou3(dets[didx[a]], gts[gidx[b]]);

    std::vector<double> aps;
    for (double thr : iou_thresholds) {
      std::vector<char> taken(gidx.size(), 0), is_tp(didx.size(), 0);
      for (size_t a = 0; a < didx.size(); ++a) {
        int best = -1;
        double best_iou = -1.0;
        for (size_t b = 0; b < gidx.size(); ++b) {
          const double v = iou[a * gidx.size() + b];
          const bool passes = thr <= 0.0 ? v > 0.0 : v >= thr;
          if (!taken[b] && passes && v > best_iou) {
            best = static_cast<int>(b);
            best_iou = v;
          }
        }
        if (best >= 0) {
          taken[best] = 1;
          is_tp[a] = 1;
        }
      }
      aps.push_back(ap_from_matches(is_tp, static_cast<int>(gidx.size())));
    }
    out.per_class_ap[cls] = std::move(aps);
  }

  if (!out.per_class_ap.empty() && !iou_thresholds.empty()) {
    double sum = 0.0;
    for (const auto& [cls, aps] : out.per_class_ap) sum += mean(aps);
    out.map = sum / static_cast<double>(out.per_class_ap.size());
  }
  return out;
}

}  // namespace ego
