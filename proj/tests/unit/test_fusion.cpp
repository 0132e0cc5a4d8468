#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "ego/fusion.hpp"
#include "ego/scenegen.hpp"
#include "test_util.hpp"

using namespace ego;

namespace {

VoxelGrid cube_grid(int n, double vs, const Vec3& center = Vec3::Zero()) {
  VoxelGrid g;
  g.D = g.H = g.W = n;
  g.voxel_size = vs;
  g.T_w_grid = Pose::from_translation(center);
  return g;
}

// V - E + F with edges counted once.
long euler_characteristic(const TriangleMesh& m) {
  std::set<std::pair<int, int>> edges;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  return static_cast<long>(m.vertices.size()) - static_cast<long>(edges.size()) + static_cast<long>(m.faces.size());
}

bool every_edge_shared_twice(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

TriangleMesh wall_at_z(double z) {
  TriangleMesh m;
  m.vertices = {Vec3(-20, -20, z), Vec3(20, -20, z), Vec3(20, 20, z), Vec3(-20, 20, z)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

DenseVolume sphere_sdf(const VoxelGrid& g, double radius) {
  DenseVolume v(g.D, g.H, g.W);
  for (int i = 0; i < g.D; ++i)
    for (int j = 0; j < g.H; ++j)
      for (int k = 0; k < g.W; ++k) v(i, j, k) = g.center_world(i, j, k).norm() - radius;
  return v;
}

}  // namespace

TEST_CASE("TSDF of a fronto-parallel plane crosses zero at the plane") {
  const PinholeCamera cam{60, 60, 40, 40, 80, 80};
  const DepthMap depth = SceneRenderer(wall_at_z(2.0)).render(cam, Pose::identity());
  const VoxelGrid grid = cube_grid(40, 0.05, Vec3(0, 0, 2.0));
  TsdfVolume vol = TsdfVolume::make(grid);
  CHECK(vol.truncation == doctest::Approx(0.15));
  integrate_depth_inplace(vol, depth, cam, Pose::identity());
  // Column through the optical axis: k = j = 20 holds x = y = +0.025.
  int crossings = 0;
  for (int i = 0; i + 1 < grid.D; ++i) {
    const double a = vol.tsdf(i, 20, 20), b = vol.tsdf(i + 1, 20, 20);
    if (vol.weights(i, 20, 20) == 0 || vol.weights(i + 1, 20, 20) == 0 || a * b > 0 || a == b) continue;
    const double za = grid.center_world(i, 20, 20).z(), zb = grid.center_world(i + 1, 20, 20).z();
    const double z0 = za + (zb - za) * a / (a - b);
    CHECK(std::abs(z0 - 2.0) <= 0.5 * grid.voxel_size);
    ++crossings;
  }
  CHECK(crossings == 1);
}

TEST_CASE("integrating the same depth twice leaves values unchanged") {
  const PinholeCamera cam{60, 60, 40, 40, 80, 80};
  const DepthMap depth = SceneRenderer(wall_at_z(2.0)).render(cam, Pose::identity());
  const VoxelGrid grid = cube_grid(20, 0.1, Vec3(0, 0, 2.0));
  const TsdfVolume once = integrate_depth(TsdfVolume::make(grid), depth, cam, Pose::identity());
  const TsdfVolume twice = integrate_depth(once, depth, cam, Pose::identity());
  for (size_t i = 0; i < once.tsdf.size(); ++i) {
    CHECK(twice.tsdf.data[i] == doctest::Approx(once.tsdf.data[i]).epsilon(1e-12));
    if (once.weights.data[i] > 0) CHECK(twice.weights.data[i] == 2 * once.weights.data[i]);
  }
}

TEST_CASE("an all-invalid depth map leaves the volume unchanged") {
  const PinholeCamera cam{60, 60, 40, 40, 80, 80};
  const VoxelGrid grid = cube_grid(10, 0.1, Vec3(0, 0, 2.0));
  const TsdfVolume fresh = TsdfVolume::make(grid);
  const TsdfVolume out = integrate_depth(fresh, DepthMap(80, 80), cam, Pose::identity());
  CHECK(out.tsdf.data == fresh.tsdf.data);
  CHECK(out.weights.data == fresh.weights.data);
}

TEST_CASE("TSDF stays in range and is order-invariant over views") {
  SceneSpec spec;
  spec.seed = 2;
  const Scene scene = generate_scene(spec);
  const auto traj = simulate_trajectory(scene, 2, 2.0);
  const FisheyeCamera cam = synthetic_fisheye(48);
  const SceneRenderer renderer(scene);
  VoxelGrid grid = cube_grid(0, 0.1, Vec3(0, 0, 1.5));
  grid.W = grid.H = 44;
  grid.D = 34;
  TsdfVolume fwd = TsdfVolume::make(grid), rev = TsdfVolume::make(grid);
  std::vector<DepthMap> depths;
  for (const auto& tp : traj) depths.push_back(renderer.render(cam, tp.T_w_cam));
  for (size_t f = 0; f < traj.size(); ++f) integrate_depth_inplace(fwd, depths[f], cam, traj[f].T_w_cam);
  for (size_t f = traj.size(); f-- > 0;) integrate_depth_inplace(rev, depths[f], cam, traj[f].T_w_cam);
  double worst = 0;
  for (size_t i = 0; i < fwd.tsdf.size(); ++i) {
    CHECK(std::abs(fwd.tsdf.data[i]) <= 1.0);
    CHECK(fwd.weights.data[i] >= 0.0);
    worst = std::max(worst, std::abs(fwd.tsdf.data[i] - rev.tsdf.data[i]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("integrate_depth rejects a depth map of the wrong size") {
  const PinholeCamera cam{60, 60, 40, 40, 80, 80};
  TsdfVolume vol = TsdfVolume::make(cube_grid(4, 0.1));
  CHECK(ego::test::throws_code([&] { integrate_depth_inplace(vol, DepthMap(10, 10), cam, Pose::identity()); },
                               ErrorCode::kShapeMismatch));
}

TEST_CASE("occupancy fusion running-mean examples") {
  const VoxelGrid global = cube_grid(10, 0.1);
  const VoxelGrid local = cube_grid(8, 0.1);
  const DenseVolume c08(8, 8, 8, 0.8), c02(8, 8, 8, 0.2);
  OccupancyVolume once = integrate_occupancy(OccupancyVolume::make(global), c08, local);
  size_t touched = 0;
  for (size_t i = 0; i < once.occ.size(); ++i) {
    if (once.counts.data[i] == 0) continue;
    ++touched;
    CHECK(once.occ.data[i] == doctest::Approx(0.8));
    CHECK(once.counts.data[i] == 1);
  }
  CHECK(touched == 8 * 8 * 8);
  const OccupancyVolume twice = integrate_occupancy(once, c08, local);
  const OccupancyVolume mixed = integrate_occupancy(once, c02, local);
  for (size_t i = 0; i < once.occ.size(); ++i) {
    if (once.counts.data[i] == 0) continue;
    CHECK(twice.occ.data[i] == doctest::Approx(0.8));
    CHECK(mixed.occ.data[i] == doctest::Approx(0.5));
  }
}

TEST_CASE("occupancy fusion is order-invariant") {
  Rng rng(3);
  const VoxelGrid global = cube_grid(16, 0.1);
  std::vector<std::pair<DenseVolume, VoxelGrid>> locals;
  for (int n = 0; n < 5; ++n) {
    VoxelGrid g = cube_grid(8, 0.13);
    g.T_w_grid = Pose(Rotation::about_z(rng.uniform(-3, 3)), ego::test::random_vec(rng, -0.3, 0.3));
    DenseVolume v(8, 8, 8);
    for (double& x : v.data) x = rng.uniform();
    locals.push_back({v, g});
  }
  OccupancyVolume a = OccupancyVolume::make(global), b = a;
  for (const auto& [v, g] : locals) integrate_occupancy_inplace(a, v, g);
  for (auto it = locals.rbegin(); it != locals.rend(); ++it) integrate_occupancy_inplace(b, it->first, it->second);
  CHECK(a.counts.data == b.counts.data);
  for (size_t i = 0; i < a.occ.size(); ++i) {
    CHECK(std::abs(a.occ.data[i] - b.occ.data[i]) < 1e-9);
    CHECK(a.occ.data[i] >= 0.0);
    CHECK(a.occ.data[i] <= 1.0);
  }
}

TEST_CASE("marching cubes: everything below iso gives an empty mesh") {
  const VoxelGrid g = cube_grid(5, 0.1);
  CHECK(marching_cubes(DenseVolume(5, 5, 5, -1.0), DenseVolume(5, 5, 5, 10.0), 0.0, 1, g).empty());
}

TEST_CASE("marching cubes: one cube split along one axis gives a quad") {
  const VoxelGrid g = cube_grid(2, 1.0);
  DenseVolume v(2, 2, 2);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      v(0, j, k) = -1.0;
      v(1, j, k) = 1.0;
    }
  const TriangleMesh m = marching_cubes(v, DenseVolume(2, 2, 2, 1.0), 0.0, 1, g);
  CHECK(m.faces.size() == 2);
  CHECK(m.vertices.size() == 4);
  for (const Vec3& p : m.vertices) CHECK(std::abs(p.z()) < 1e-12);
  // Outside (value above iso) lies towards +z.
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto [a, b, c] = m.triangle(f);
    CHECK((b - a).cross(c - a).z() > 0.0);
  }
}

TEST_CASE("marching cubes skips cubes with too few observations") {
  const VoxelGrid g = cube_grid(2, 1.0);
  DenseVolume v(2, 2, 2, 1.0), counts(2, 2, 2, 5.0);
  v(0, 0, 0) = -1.0;
  CHECK(marching_cubes(v, counts, 0.0, 5, g).faces.size() == 1);
  counts(1, 1, 1) = 4.0;
  CHECK(marching_cubes(v, counts, 0.0, 5, g).empty());
}

TEST_CASE("marching cubes on a unit sphere SDF") {
  const double vs = 0.04;
  const VoxelGrid g = cube_grid(60, vs);
  const TriangleMesh m = marching_cubes(sphere_sdf(g, 1.0), DenseVolume(60, 60, 60, 100.0), 0.0, 2, g);
  REQUIRE_FALSE(m.empty());
  double worst = 0;
  for (const Vec3& p : m.vertices) worst = std::max(worst, std::abs(p.norm() - 1.0));
  CHECK(worst <= vs);
  CHECK(euler_characteristic(m) == 2);
  CHECK(every_edge_shared_twice(m));
  CHECK(m.indices_valid());
  size_t outward = 0;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto [a, b, c] = m.triangle(f);
    outward += (b - a).cross(c - a).dot(a + b + c) > 0.0;
    CHECK(m.face_area(f) > 0.0);
  }
  CHECK(outward == m.faces.size());
}

TEST_CASE("extracted vertices lie near observed voxel centers") {
  const double vs = 0.1;
  VoxelGrid g = cube_grid(24, vs, Vec3(0.3, -0.2, 0.1));
  TsdfVolume vol = TsdfVolume::make(g);
  for (int i = 0; i < g.D; ++i)
    for (int j = 0; j < g.H; ++j)
      for (int k = 0; k < g.W; ++k) {
        const double d = (g.center_world(i, j, k) - Vec3(0.3, -0.2, 0.1)).norm() - 0.8;
        vol.tsdf(i, j, k) = std::clamp(d / vol.truncation, -1.0, 1.0);
        vol.weights(i, j, k) = k < 12 ? 3.0 : 1.0;  // only half is observed often enough
      }
  const TriangleMesh m = extract_mesh(vol);
  REQUIRE_FALSE(m.empty());
  for (const Vec3& p : m.vertices) {
    const Vec3 q = g.to_index_coords(p);
    CHECK(q.x() <= 11.0 + 1e-9);
  }
}

TEST_CASE("occupancy extraction treats values above 0.5 as inside") {
  const VoxelGrid g = cube_grid(2, 1.0);
  OccupancyVolume vol = OccupancyVolume::make(g);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      vol.occ(0, j, k) = 1.0;
      vol.occ(1, j, k) = 0.0;
    }
  std::fill(vol.counts.data.begin(), vol.counts.data.end(), 5);
  const TriangleMesh m = extract_mesh(vol);
  REQUIRE(m.faces.size() == 2);
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto [a, b, c] = m.triangle(f);
    CHECK((b - a).cross(c - a).z() > 0.0);  // free space (low occupancy) is above
  }
}

TEST_CASE("depth outside the fusion volume is counted") {
  const PinholeCamera cam{8, 8, 4, 4, 8, 8};
  const DepthMap near = SceneRenderer(wall_at_z(1.0)).render(cam, Pose::identity());
  const DepthMap far = SceneRenderer(wall_at_z(5.0)).render(cam, Pose::identity());
  const VoxelGrid g = cube_grid(40, 0.1, Vec3(0, 0, 1.0));
  CHECK(count_out_of_extent(g, near, cam, Pose::identity()) == 0);
  CHECK(count_out_of_extent(g, far, cam, Pose::identity()) == 64);
  CHECK(count_out_of_extent(g, DepthMap(8, 8), cam, Pose::identity()) == 0);
  CHECK(ego::test::throws_code([&] { count_out_of_extent(g, DepthMap(4, 4), cam, Pose::identity()); },
                               ErrorCode::kShapeMismatch));
}
