#include "ego/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ego/losses.hpp"
#include "ego/rng.hpp"
#include "ego/scenegen.hpp"

namespace ego {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradcheckResult gradcheck_focal(std::uint64_t seed, int points) {
  GradcheckResult r{"focal_loss", points, 0.0, 1e-4};
  Rng rng(seed);
  const FocalParams fp;
  const double h = 1e-5;
  for (int n = 0; n < points; ++n) {
    const double p = rng.uniform(0.01, 0.99);
    const double y = rng.uniform();
    const double num = (focal_loss(p + h, y, fp) - focal_loss(p - h, y, fp)) / (2.0 * h);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(focal_loss_grad(p, y, fp), num));
  }
  return r;
}

GradcheckResult gradcheck_detection(std::uint64_t seed, int points) {
  GradcheckResult r{"detection_loss", points, 0.0, 1e-3};
  Rng rng(seed);
  const int K = 3;
  const double h = 1e-5;
  for (int n = 0; n < points; ++n) {
    const Pose cam = look_pose(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 1.5), rng.uniform(-3, 3), -0.3);
    const VoxelGrid grid = anchor_grid(cam, GravityDir(), 1.0, 4);
    const Vec3 gc = grid.center_world(1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(2)),
                                      1 + static_cast<int>(rng.below(2)));
    const Obb3 gt = Obb3::make(gc + Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)),
                               rng.uniform(-3, 3), Vec3(rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8)),
                               static_cast<int>(rng.below(K)), K);
    const DetectionGrid target = encode_targets({gt}, grid, K);
    DetectionGrid pred(K, grid.D, grid.H, grid.W);
    for (size_t v = 0; v < grid.voxel_count(); ++v) {
      pred.centerness.data[v] = rng.uniform(0.05, 0.95);
      for (int c = 0; c < K; ++c) pred.class_logits.at(c, v) = rng.normal();
      for (int a = 0; a < kParamCount; ++a) {
        const double t = target.params.at(a, v);
        pred.params.at(a, v) = a < 3 ? std::max(0.2, t * rng.uniform(0.8, 1.2) + (t == 0.0 ? 0.5 : 0.0))
                                     : t + rng.uniform(-0.3, 0.3);
      }
    }
    const auto loss = [&](const DetectionGrid& p) { return detection_loss(p, target, grid).value; };
    const DetectionLoss an = detection_loss(pred, target, grid);
    size_t pos = 0;
    while (target.centerness.data[pos] != 1.0) ++pos;
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + h;
      const double up = loss(pred);
      slot = keep - h;
      const double down = loss(pred);
      slot = keep;
      r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic, (up - down) / (2.0 * h)));
    };
    for (int a = 0; a < kParamCount; ++a) probe(pred.params.at(a, pos), an.grad.params.at(a, pos));
    const int c = static_cast<int>(rng.below(K));
    probe(pred.class_logits.at(c, pos), an.grad.class_logits.at(c, pos));
    const size_t v = rng.below(grid.voxel_count());
    probe(pred.centerness.data[v], an.grad.centerness.data[v]);
  }
  return r;
}

GradcheckResult gradcheck_occupancy(std::uint64_t seed, int points) {
  GradcheckResult r{"occupancy_loss", points, 0.0, 1e-3};
  Rng rng(seed);
  Scene scene;
  scene.room_mesh = room_mesh(scene.room);
  const SceneRenderer renderer(scene);
  PinholeCamera cam{12.0, 12.0, 8.0, 6.0, 16, 12};
  const double h = 1e-6;
  for (int n = 0; n < points; ++n) {
    const Pose T_w_cam = look_pose(Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.5), rng.uniform(-3, 3), -0.3);
    const VoxelGrid grid = anchor_grid(T_w_cam, GravityDir(), 4.0, 8);
    const DepthMap depth = renderer.render(cam, T_w_cam);
    DenseVolume occ(grid.D, grid.H, grid.W);
    for (double& x : occ.data) x = rng.uniform(0.05, 0.95);
    const std::uint64_t s = rng.raw();
    const auto an = occupancy_loss(occ, grid, depth, cam, T_w_cam, {}, {}, s);
    std::vector<size_t> touched;
    for (size_t v = 0; v < occ.size(); ++v)
      if (an.grad.data[v] != 0.0) touched.push_back(v);
    if (touched.empty()) continue;
    const size_t v = touched[rng.below(touched.size())];
    const double keep = occ.data[v];
    occ.data[v] = keep + h;
    const double up = occupancy_loss(occ, grid, depth, cam, T_w_cam, {}, {}, s).value;
    occ.data[v] = keep - h;
    const double down = occupancy_loss(occ, grid, depth, cam, T_w_cam, {}, {}, s).value;
    r.max_rel_error = std::max(r.max_rel_error, relative_error(an.grad.data[v], (up - down) / (2.0 * h)));
  }
  return r;
}

GradcheckResult gradcheck_tv(std::uint64_t seed, int points) {
  GradcheckResult r{"tv_loss", points, 0.0, 1e-4};
  Rng rng(seed);
  const double h_max = 1e-4;  // the smoothed |.| is linear away from zero
  for (int n = 0; n < points; ++n) {
    DenseVolume vol(2 + static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(4)));
    for (double& x : vol.data) x = rng.uniform();
    const auto an = tv_loss(vol);
    const size_t v = rng.below(vol.size());
    // Keep the stencil clear of the |.| kink: h below every adjacent difference.
    const int i = static_cast<int>(v / (static_cast<size_t>(vol.H) * vol.W));
    const int j = static_cast<int>(v / vol.W % vol.H), k = static_cast<int>(v % vol.W);
    double gap = 1.0;
    const int nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (const auto& o : nb) {
      const int a = i + o[0], b = j + o[1], c = k + o[2];
      if (a < 0 || b < 0 || c < 0 || a >= vol.D || b >= vol.H || c >= vol.W) continue;
      gap = std::min(gap, std::abs(vol(a, b, c) - vol.data[v]));
    }
    const double h = std::min(h_max, 0.5 * gap);
    const double keep = vol.data[v];
    vol.data[v] = keep + h;
    const double up = tv_loss(vol).value;
    vol.data[v] = keep - h;
    const double down = tv_loss(vol).value;
    r.max_rel_error = std::max(r.max_rel_error, relative_error(an.grad.data[v], (up - down) / (2.0 * h)));
  }
  return r;
}

std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, int points) {
  return {gradcheck_focal(seed, points), gradcheck_detection(seed + 1, points), gradcheck_occupancy(seed + 2, points),
          gradcheck_tv(seed + 3, points)};
}

}  // namespace ego
