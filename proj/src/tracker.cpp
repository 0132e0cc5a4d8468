#include "ego/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "ego/error.hpp"
#include "ego/hungarian.hpp"

namespace ego {

void TrackerConfig::validate() const {
  auto check01 = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::kInvalidArgument, std::string(name) + " must be in [0, 1]");
  };
  check01(p_inst, "p_inst");
  check01(p_assoc, "p_assoc");
  check01(iou_gate, "iou_gate");
  check01(dedup_iou3, "dedup_iou3");
  check01(dedup_iou2, "dedup_iou2");
  if (p_assoc > p_inst) fail(ErrorCode::kInvalidArgument, "p_assoc must not exceed p_inst");
  if (n_min < 1) fail(ErrorCode::kInvalidArgument, "n_min must be at least 1");
  if (!(t_inst >= 0.0)) fail(ErrorCode::kInvalidArgument, "t_inst must be non-negative");
  for (double x : w) {
    if (!(x >= 0.0)) fail(ErrorCode::kInvalidArgument, "cost weights must be non-negative");
  }
}

AssocTerms assoc_terms(const TrackedObject& track, const Obb3& det, const ViewContext& view) {
  AssocTerms t;
  const int cls = track.obb.label();
  const double p = (cls >= 0 && static_cast<size_t>(cls) < det.class_probs.size()) ? det.class_probs[cls] : 0.0;
  t.c_class = 1.0 - p;
  t.c_bbox3 = (track.obb.center - det.center).norm();
  t.iou3 = iou3(track.obb, det);
  t.c_iou3d = 1.0 - t.iou3;
  const auto a = project_bbox2(track.obb, view.camera, view.T_w_cam);
  const auto b = project_bbox2(det, view.camera, view.T_w_cam);
  if (a && b) {
    t.both_projected = true;
    t.c_bbox2 = (a->center() - b->center()).norm();
    t.iou2 = iou2(*a, *b);
    t.c_iou2d = 1.0 - t.iou2;
  }
  return t;
}

double assoc_cost(const TrackedObject& track, const Obb3& det, const ViewContext& view,
                  const std::array<double, 5>& w) {
  const AssocTerms t = assoc_terms(track, det, view);
  return w[0] * t.c_class + w[1] * t.c_bbox2 + w[2] * t.c_bbox3 + w[3] * t.c_iou2d + w[4] * t.c_iou3d;
}

TrackedObject update_track(const TrackedObject& track, const Obb3& det, double t) {
  TrackedObject out = track;
  const double n = track.n;
  const double n1 = n + 1.0;
  out.n = track.n + 1;
  out.t_last = t;
  out.obb.dims = (track.obb.dims * n + det.dims) / n1;
  out.obb.score = (track.obb.score * n + det.score) / n1;
  if (det.class_probs.size() == track.obb.class_probs.size()) {
    for (size_t c = 0; c < out.obb.class_probs.size(); ++c) {
      out.obb.class_probs[c] = (track.obb.class_probs[c] * n + det.class_probs[c]) / n1;
    }
  }
  const Pose T = track.obb.pose();
  try {
    const Tangent delta = pose_boxminus(T, det.pose());
    const Pose updated = (T * se3_exp(delta / n1)).renormalized();
    out.obb.center = updated.translation;
    const Mat3& R = updated.rotation.matrix();
    out.obb.yaw = wrap_angle(std::atan2(R(1, 0), R(0, 0)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNearPiRotation) throw;
  }
  return out;
}

namespace {

std::vector<TrackedObject> deduplicate(std::vector<TrackedObject> tracks, const ViewContext& view,
                                       const TrackerConfig& cfg) {
  std::stable_sort(tracks.begin(), tracks.end(), [](const TrackedObject& a, const TrackedObject& b) {
    if (a.n != b.n) return a.n > b.n;
    if (a.obb.score != b.obb.score) return a.obb.score > b.obb.score;
    return a.id < b.id;
  });
  std::vector<TrackedObject> kept;
  std::vector<std::optional<Box2>> kept_2d;
  for (auto& tr : tracks) {
    const auto box2 = project_bbox2(tr.obb, view.camera, view.T_w_cam);
    bool dup = false;
    for (size_t k = 0; k < kept.size() && !dup; ++k) {
      if (iou3(kept[k].obb, tr.obb) > cfg.dedup_iou3) dup = true;
      if (box2 && kept_2d[k] && iou2(*kept_2d[k], *box2) > cfg.dedup_iou2) dup = true;
    }
    if (!dup) {
      kept.push_back(std::move(tr));
      kept_2d.push_back(box2);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return kept;
}

}  // namespace

SceneState step(const SceneState& scene, const std::vector<Obb3>& dets, double t, const ViewContext& view,
                const TrackerConfig& cfg) {
  if (t < scene.time) fail(ErrorCode::kNonMonotonicTime, "tracker step time went backwards");
  cfg.validate();

  std::vector<const Obb3*> cands;
  for (const Obb3& d : dets) {
    if (d.score >= cfg.p_assoc) cands.push_back(&d);
  }

  SceneState next = scene;
  next.time = t;
  std::vector<char> used(cands.size(), 0);

  if (!next.tracks.empty() && !cands.empty()) {
    const auto M = static_cast<Eigen::Index>(next.tracks.size());
    const auto N = static_cast<Eigen::Index>(cands.size());
    Eigen::MatrixXd cost(M, N);
    std::vector<AssocTerms> terms(static_cast<size_t>(M * N));
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index j = 0; j < N; ++j) {
        const AssocTerms at = assoc_terms(next.tracks[i], *cands[j], view);
        terms[i * N + j] = at;
        cost(i, j) = cfg.w[0] * at.c_class + cfg.w[1] * at.c_bbox2 + cfg.w[2] * at.c_bbox3 +
                     cfg.w[3] * at.c_iou2d + cfg.w[4] * at.c_iou3d;
      }
    }
    for (const auto& [i, j] : hungarian(cost)) {
      const AssocTerms& at = terms[i * N + j];
      const bool gated = at.iou3 >= cfg.iou_gate || (at.both_projected && at.iou2 >= cfg.iou_gate);
      if (!gated) continue;
      next.tracks[i] = update_track(next.tracks[i], *cands[j], t);
      used[j] = 1;
    }
  }

  for (size_t j = 0; j < cands.size(); ++j) {
    if (used[j] || cands[j]->score < cfg.p_inst) continue;
    TrackedObject tr;
    tr.id = next.next_id++;
    tr.obb = *cands[j];
    tr.n = 1;
    tr.t_created = tr.t_last = t;
    next.tracks.push_back(std::move(tr));
  }

  std::erase_if(next.tracks, [&](const TrackedObject& tr) { return tr.n < cfg.n_min && t - tr.t_created > cfg.t_inst; });

  next.tracks = deduplicate(std::move(next.tracks), view, cfg);
  return next;
}

std::vector<Obb3> scene_boxes(const SceneState& scene) {
  std::vector<Obb3> out;
  out.reserve(scene.tracks.size());
  for (const auto& tr : scene.tracks) out.push_back(tr.obb);
  return out;
}

}  // namespace ego
