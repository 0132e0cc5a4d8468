#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ego/losses.hpp"
#include "ego/obb.hpp"
#include "ego/scenegen.hpp"
#include "test_util.hpp"

using namespace ego;
using ego::test::random_vec;
constexpr double kPi = std::numbers::pi;

namespace {

Obb3 unit_cube(const Vec3& c, double yaw = 0.0) { return Obb3::make(c, yaw, Vec3::Ones(), 0, 1); }

VoxelGrid small_grid() {
  return anchor_grid(look_pose(Vec3(0.2, -0.1, 1.5), 0.6, -0.3), GravityDir(), 2.0, 8);
}

}  // namespace

TEST_CASE("iou3 closed-form examples") {
  CHECK(iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3::Zero())) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3(3, 0, 0))) == 0.0);
  CHECK(iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3(0.5, 0, 0))) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // Vertical offset only: the footprint matches, height overlap halves.
  CHECK(iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3(0, 0, 0.5))) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // Rotated square inside square: the octagon area is 2 (sqrt 2 - 1).
  const double oct = 2.0 * (std::sqrt(2.0) - 1.0);
  CHECK(iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3::Zero(), kPi / 4)) == doctest::Approx(oct / (2.0 - oct)).epsilon(1e-12));
}

TEST_CASE("iou3 agrees with Monte Carlo on the rotated cube pair") {
  Rng rng(1);
  const double mc = ego::test::monte_carlo_iou(unit_cube(Vec3::Zero()), unit_cube(Vec3::Zero(), kPi / 4), 1000000, rng);
  CHECK(std::abs(mc - iou3(unit_cube(Vec3::Zero()), unit_cube(Vec3::Zero(), kPi / 4))) <= 0.005);
}

TEST_CASE("iou3 agrees with Monte Carlo on random pairs") {
  Rng rng(2);
  for (int n = 0; n < 20; ++n) {
    const auto [a, b] = ego::test::random_box_pair(rng);
    CHECK(std::abs(ego::test::monte_carlo_iou(a, b, 200000, rng) - iou3(a, b)) <= 0.01);
  }
}

TEST_CASE("iou3 properties: range, symmetry, self, rigid invariance") {
  Rng rng(3);
  for (int n = 0; n < 500; ++n) {
    auto [a, b] = ego::test::random_box_pair(rng);
    const double v = iou3(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::abs(v - iou3(b, a)) < 1e-12);
    CHECK(iou3(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    const double th = rng.uniform(-kPi, kPi);
    const Rotation R = Rotation::about_z(th);
    const Vec3 t = random_vec(rng, -5, 5);
    Obb3 a2 = a, b2 = b;
    a2.center = R * a.center + t;
    b2.center = R * b.center + t;
    a2.yaw = wrap_angle(a.yaw + th);
    b2.yaw = wrap_angle(b.yaw + th);
    CHECK(std::abs(iou3(a2, b2) - v) < 1e-9);
  }
}

TEST_CASE("iou2 examples") {
  const Box2 a{0, 0, 2, 2};
  CHECK(iou2(a, a) == 1.0);
  CHECK(iou2(a, Box2{3, 3, 4, 4}) == 0.0);
  CHECK(iou2(a, Box2{1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("Obb3 invariants") {
  const Obb3 b = Obb3::make(Vec3(1, 2, 0.5), 4.0, Vec3(0.3, 0.4, 1.0), 2, 4, 0.7);
  CHECK(b.is_valid());
  CHECK(b.label() == 2);
  CHECK(b.yaw >= -kPi);
  CHECK(b.yaw < kPi);
  Obb3 bad = b;
  bad.dims.x() = 0.0;
  CHECK_FALSE(bad.is_valid());
  bad = b;
  bad.class_probs = {0.5, 0.6, 0.0, 0.0};
  CHECK_FALSE(bad.is_valid());
}

TEST_CASE("decode examples") {
  const VoxelGrid grid = small_grid();
  DetectionGrid det(3, grid.D, grid.H, grid.W);
  CHECK(decode(det, grid, 0.2).empty());
  const size_t v = grid.linear(3, 4, 5);
  det.centerness.data[v] = 0.9;
  for (int a = 0; a < 3; ++a) det.params.at(a, v) = 0.5;
  const auto boxes = decode(det, grid, 0.2);
  REQUIRE(boxes.size() == 1);
  CHECK((boxes[0].center - grid.center_world(3, 4, 5)).norm() < 1e-12);
  CHECK(boxes[0].score == 0.9);
  CHECK(boxes[0].yaw == doctest::Approx(wrap_angle(grid.yaw())));
}

TEST_CASE("decode(encode(boxes)) recovers boxes in distinct voxels") {
  Rng rng(4);
  const VoxelGrid grid = small_grid();
  std::vector<Obb3> gt;
  std::vector<size_t> used;
  while (gt.size() < 6) {
    const int i = 1 + static_cast<int>(rng.below(6)), j = 1 + static_cast<int>(rng.below(6)), k = 1 + static_cast<int>(rng.below(6));
    if (std::find(used.begin(), used.end(), grid.linear(i, j, k)) != used.end()) continue;
    used.push_back(grid.linear(i, j, k));
    const Vec3 c = grid.center_world(i, j, k) + grid.T_w_grid.rotation * random_vec(rng, -0.49, 0.49) * grid.voxel_size;
    gt.push_back(Obb3::make(c, rng.uniform(-kPi, kPi), random_vec(rng, 0.2, 1.0), static_cast<int>(rng.below(3)), 3));
  }
  DetectionGrid enc = encode_targets(gt, grid, 3);
  const auto dec = decode(enc, grid, 0.5);
  REQUIRE(dec.size() == gt.size());
  for (const Obb3& g : gt) {
    const auto it = std::min_element(dec.begin(), dec.end(), [&](const Obb3& a, const Obb3& b) {
      return (a.center - g.center).norm() < (b.center - g.center).norm();
    });
    CHECK((it->center - g.center).norm() < 1e-9);
    CHECK((it->dims - g.dims).norm() < 1e-12);
    CHECK(std::abs(wrap_angle(it->yaw - g.yaw)) < 1e-9);
    CHECK(it->label() == g.label());
  }
}

TEST_CASE("nms3 examples") {
  const VoxelGrid grid = small_grid();
  Obb3 a = unit_cube(Vec3::Zero());
  a.score = 0.9;
  CHECK(nms3({a}, grid).size() == 1);
  Obb3 b = a;
  b.score = 0.8;
  const auto kept = nms3({b, a}, grid);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms3 matches a brute-force greedy oracle on 50 random boxes") {
  Rng rng(5);
  const VoxelGrid grid = small_grid();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Obb3> dets;
    for (int n = 0; n < 50; ++n) {
      Obb3 d = Obb3::make(random_vec(rng, -0.8, 0.8), rng.uniform(-3, 3), random_vec(rng, 0.1, 0.6), 0, 1);
      d.score = rng.uniform();
      dets.push_back(d);
    }
    const double r = 2 * grid.voxel_size;
    std::vector<Obb3> sorted = dets, want;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Obb3& x, const Obb3& y) { return x.score > y.score; });
    for (const Obb3& c : sorted) {
      bool sup = false;
      for (const Obb3& k : want) sup = sup || ((k.center - c.center).norm() <= r && iou3(k, c) > 0.0);
      if (!sup) want.push_back(c);
    }
    const auto got = nms3(dets, grid);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].score == want[i].score);
      if (i > 0) CHECK(got[i].score <= got[i - 1].score);
    }
  }
}

TEST_CASE("project_bbox2 examples") {
  const PinholeCamera cam{100, 100, 80, 60, 160, 120};
  const Obb3 ahead = Obb3::make(Vec3(0, 0, 3), 0.3, Vec3(0.5, 0.5, 0.5), 0, 1);
  // Camera frame = world frame; yaw about world z is a roll here but stays symmetric.
  const auto box = project_bbox2(ahead, cam, Pose::identity());
  REQUIRE(box.has_value());
  CHECK(box->center().x() == doctest::Approx(80.0));
  CHECK(box->center().y() == doctest::Approx(60.0));
  CHECK_FALSE(project_bbox2(Obb3::make(Vec3(0, 0, -3), 0, Vec3::Ones(), 0, 1), cam, Pose::identity()).has_value());
}

TEST_CASE("project_bbox2 matches a per-corner loop") {
  Rng rng(6);
  const FisheyeCamera cam = synthetic_fisheye(128);
  for (int n = 0; n < 200; ++n) {
    const Pose T = look_pose(random_vec(rng, -1, 1), rng.uniform(-3, 3), -0.3);
    const Obb3 b = Obb3::make(random_vec(rng, -2, 2), rng.uniform(-3, 3), random_vec(rng, 0.2, 1.0), 0, 1);
    std::optional<Box2> want;
    for (const Vec3& c : b.corners()) {
      const Pixel px = project(Camera(cam), T.inverse() * c);
      if (!px.valid) continue;
      if (!want) want = Box2{px.u, px.v, px.u, px.v};
      want->x0 = std::min(want->x0, px.u);
      want->y0 = std::min(want->y0, px.v);
      want->x1 = std::max(want->x1, px.u);
      want->y1 = std::max(want->y1, px.v);
    }
    const auto got = project_bbox2(b, cam, T);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->x0 == want->x0);
      CHECK(got->y1 == want->y1);
    }
  }
}

TEST_CASE("softmax is stable for large logits") {
  const auto p = softmax({1000.0, 1000.0, -1000.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == 0.0);
}
