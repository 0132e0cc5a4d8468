#include <algorithm>
#include <array>
#include <cmath>

#include "doctest.h"
#include "ego/gradcheck.hpp"
#include "ego/losses.hpp"
#include "ego/scenegen.hpp"
#include "test_util.hpp"

using namespace ego;

namespace {

double fl_formula(double p, double y, double alpha = 0.25, double gamma = 2.0) {
  return -(y * alpha * std::pow(1 - p, gamma) * std::log(p) + (1 - y) * (1 - alpha) * std::pow(p, gamma) * std::log(1 - p));
}

VoxelGrid det_grid() { return anchor_grid(look_pose(Vec3(0.1, 0.2, 1.5), 0.4, -0.3), GravityDir(), 2.0, 4); }

// Wall at z = 2 seen by a pinhole at the origin; grid layers along z sit at
// 1.6, 1.7, ..., 2.5 so the wall passes through layer 4.
struct WallSetup {
  PinholeCamera cam{8, 8, 4, 4, 8, 8};
  VoxelGrid grid;
  DepthMap depth;
  WallSetup() {
    grid.D = 10;
    grid.H = grid.W = 26;
    grid.voxel_size = 0.1;
    grid.T_w_grid = Pose::from_translation(Vec3(0, 0, 2.05));
    TriangleMesh wall;
    wall.vertices = {Vec3(-9, -9, 2), Vec3(9, -9, 2), Vec3(9, 9, 2), Vec3(-9, 9, 2)};
    wall.faces = {{0, 1, 2}, {0, 2, 3}};
    depth = SceneRenderer(wall).render(cam, Pose::identity());
  }
  DenseVolume layered(const std::array<double, 10>& layer) const {
    DenseVolume v(grid.D, grid.H, grid.W);
    for (int i = 0; i < grid.D; ++i)
      for (size_t n = 0; n < static_cast<size_t>(grid.H) * grid.W; ++n) v.data[i * grid.H * grid.W + n] = layer[i];
    return v;
  }
};

}  // namespace

TEST_CASE("focal loss examples") {
  CHECK(focal_loss(1 - kProbEps, 1.0) < 1e-12);
  // alpha/4 + (1 - alpha)/4 of the half-weighted log 2 terms.
  CHECK(focal_loss(0.5, 0.5) == doctest::Approx(0.125 * std::log(2.0)).epsilon(1e-12));
  Rng rng(1);
  for (int n = 0; n < 200; ++n) {
    const double p = rng.uniform(0.01, 0.99), y = rng.uniform();
    CHECK(focal_loss(p, y) == doctest::Approx(fl_formula(p, y)).epsilon(1e-12));
    CHECK(focal_loss(p, y) >= 0.0);
  }
  // Clamped inputs: finite value, zero gradient.
  CHECK(std::isfinite(focal_loss(0.0, 1.0)));
  CHECK(focal_loss_grad(0.0, 1.0) == 0.0);
  CHECK(focal_loss_grad(1.0, 0.0) == 0.0);
}

TEST_CASE("focal gradient matches central differences at 100 points") {
  const GradcheckResult r = gradcheck_focal(11);
  CHECK(r.points == 100);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("parameter validation") {
  FocalParams fp;
  fp.alpha = 0.0;
  CHECK(ego::test::throws_code([&] { fp.validate(); }, ErrorCode::kInvalidArgument));
  LossWeights w;
  w.w_iou = -1;
  CHECK(ego::test::throws_code([&] { w.validate(); }, ErrorCode::kInvalidArgument));
}

TEST_CASE("encode_targets examples") {
  const VoxelGrid grid = det_grid();
  const DetectionGrid empty = encode_targets({}, grid, 3);
  CHECK(*std::max_element(empty.centerness.data.begin(), empty.centerness.data.end()) == 0.0);
  CHECK(*std::max_element(empty.params.data.begin(), empty.params.data.end()) == 0.0);

  const Obb3 b = Obb3::make(grid.center_world(1, 2, 3), 0.5, Vec3(0.3, 0.4, 0.5), 2, 3);
  const DetectionGrid t = encode_targets({b}, grid, 3);
  const size_t v = grid.linear(1, 2, 3);
  CHECK(std::count(t.centerness.data.begin(), t.centerness.data.end(), 1.0) == 1);
  CHECK(t.centerness.data[v] == 1.0);
  for (int a = 3; a < 6; ++a) CHECK(std::abs(t.params.at(a, v)) < 1e-12);
  CHECK(t.class_logits.at(2, v) > t.class_logits.at(0, v));
  // Boxes outside the grid are dropped; the first box wins a shared voxel.
  Obb3 far = b;
  far.center += Vec3(50, 0, 0);
  Obb3 second = b;
  second.dims = Vec3(0.9, 0.9, 0.9);
  const DetectionGrid t2 = encode_targets({b, second, far}, grid, 3);
  CHECK(std::count(t2.centerness.data.begin(), t2.centerness.data.end(), 1.0) == 1);
  CHECK(t2.params.at(0, v) == doctest::Approx(0.3));
}

TEST_CASE("detection loss of a saturated target against itself is near zero") {
  Rng rng(2);
  const VoxelGrid grid = det_grid();
  std::vector<Obb3> gt;
  for (int n = 0; n < 3; ++n)
    gt.push_back(Obb3::make(grid.center_world(static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4)), n),
                            rng.uniform(-3, 3), ego::test::random_vec(rng, 0.2, 0.8), n, 3));
  const DetectionGrid t = encode_targets(gt, grid, 3);
  const DetectionLoss l = detection_loss(t, t, grid);
  CHECK(l.value >= 0.0);
  CHECK(l.value < 1e-3);
  CHECK(l.positives == 3);
}

TEST_CASE("detection loss IoU term for a box shifted to IoU 1/3") {
  VoxelGrid grid = det_grid();
  grid.voxel_size = 0.5;
  const Obb3 b = Obb3::make(grid.center_world(2, 2, 2), 0.0, Vec3::Ones(), 1, 3);
  const DetectionGrid t = encode_targets({b}, grid, 3);
  DetectionGrid shifted = t;
  const size_t v = grid.linear(2, 2, 2);
  shifted.params.at(3, v) += 1.0;  // one voxel (0.5 m) along the grid x axis, i.e. vertically
  const LossWeights w;
  const double base = detection_loss(t, t, grid, w).value, moved = detection_loss(shifted, t, grid, w).value;
  CHECK(moved - base == doctest::Approx(w.w_iou * (2.0 / 3.0) / grid.voxel_count()).epsilon(1e-9));
}

TEST_CASE("detection loss shape mismatch") {
  const VoxelGrid grid = det_grid();
  const DetectionGrid a(3, 4, 4, 4), b(2, 4, 4, 4);
  CHECK(ego::test::throws_code([&] { detection_loss(a, b, grid); }, ErrorCode::kShapeMismatch));
}

TEST_CASE("detection loss gradient matches central differences") {
  const GradcheckResult r = gradcheck_detection(12);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("occupancy loss: constant 0.5 gives the closed-form constant") {
  const WallSetup s;
  const DenseVolume half(s.grid.D, s.grid.H, s.grid.W, 0.5);
  const VolumeLoss l = occupancy_loss(half, s.grid, s.depth, s.cam, Pose::identity());
  CHECK(l.samples == 64);
  CHECK(l.value == doctest::Approx(fl_formula(0.5, 0) + fl_formula(0.5, 0.5) + fl_formula(0.5, 1)).epsilon(1e-12));
}

TEST_CASE("occupancy loss: the step volume is minimal over layered {0, 0.5, 1} volumes") {
  const WallSetup s;
  // Layers 2..6 (z = 1.8 .. 2.2) vary; the rest are fixed to the step.
  const std::array<double, 10> step{0, 0, 0, 0, 0.5, 1, 1, 1, 1, 1};
  const double best = occupancy_loss(s.layered(step), s.grid, s.depth, s.cam, Pose::identity()).value;
  const double vals[3] = {0.0, 0.5, 1.0};
  int count = 0;
  for (int code = 0; code < 243; ++code) {
    std::array<double, 10> layer = step;
    for (int m = 0, c = code; m < 5; ++m, c /= 3) layer[2 + m] = vals[c % 3];
    const double v = occupancy_loss(s.layered(layer), s.grid, s.depth, s.cam, Pose::identity()).value;
    CHECK(v >= best - 1e-12);
    ++count;
  }
  CHECK(count == 243);
}

TEST_CASE("occupancy loss: empty depth and sample bookkeeping") {
  const WallSetup s;
  const DenseVolume half(s.grid.D, s.grid.H, s.grid.W, 0.5);
  CHECK(ego::test::throws_code([&] { occupancy_loss(half, s.grid, DepthMap(8, 8), s.cam, Pose::identity()); },
                               ErrorCode::kNoValidSamples));
  // Wall outside the grid along the rays: every triple leaves the grid.
  DepthMap far(8, 8);
  std::fill(far.data.begin(), far.data.end(), 9.0f);
  CHECK(ego::test::throws_code([&] { occupancy_loss(half, s.grid, far, s.cam, Pose::identity()); },
                               ErrorCode::kNoValidSamples));
}

TEST_CASE("occupancy loss is invariant under a joint rigid transform") {
  const WallSetup s;
  Rng rng(3);
  DenseVolume occ(s.grid.D, s.grid.H, s.grid.W);
  for (double& x : occ.data) x = rng.uniform(0.05, 0.95);
  const Pose M(Rotation::about_z(0.8) * so3_exp(Vec3(0.1, -0.2, 0.0)), Vec3(1, -2, 0.5));
  VoxelGrid moved = s.grid;
  moved.T_w_grid = M * s.grid.T_w_grid;
  const double a = occupancy_loss(occ, s.grid, s.depth, s.cam, Pose::identity(), {}, {}, 5).value;
  const double b = occupancy_loss(occ, moved, s.depth, s.cam, M, {}, {}, 5).value;
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("occupancy loss gradient matches central differences") {
  const GradcheckResult r = gradcheck_occupancy(13);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("tv loss examples") {
  CHECK(tv_loss(DenseVolume(3, 4, 5, 0.7)).value == 0.0);
  const int L = 6;
  DenseVolume ramp(L, 3, 4);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) ramp(i, j, k) = static_cast<double>(i) / (L - 1);
  CHECK(tv_loss(ramp).value == doctest::Approx(1.0 / (L - 1)).epsilon(1e-6));
  CHECK(ego::test::throws_code([] { tv_loss(DenseVolume(1, 4, 4)); }, ErrorCode::kVolumeTooSmall));
}

TEST_CASE("tv gradient matches central differences") {
  const GradcheckResult r = gradcheck_tv(14);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("run_gradcheck passes at several seeds") {
  for (std::uint64_t seed : {0u, 100u, 200u}) {
    for (const auto& r : run_gradcheck(seed, 50)) {
      INFO(r.name << " seed " << seed << " error " << r.max_rel_error);
      CHECK(r.passed());
    }
  }
}

TEST_CASE("relative error floor") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  CHECK(relative_error(2.0, 1.0) == 0.5);
}
