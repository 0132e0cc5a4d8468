#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ego/metrics.hpp"
#include "ego/scenegen.hpp"
#include "test_util.hpp"

using namespace ego;
using ego::test::random_vec;

namespace {

// n x n grid of unit-area squares spanning [0, n] x [0, n] at height z.
TriangleMesh plane_patch(int n, double z, int x_cells = -1) {
  if (x_cells < 0) x_cells = n;
  TriangleMesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= x_cells; ++i) m.vertices.push_back(Vec3(i, j, z));
  const int row = x_cells + 1;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < x_cells; ++i) {
      const int a = j * row + i;
      m.faces.push_back({a, a + 1, a + row + 1});
      m.faces.push_back({a, a + row + 1, a + row});
    }
  return m;
}

double brute_force_dist(const Vec3& p, const TriangleMesh& m) {
  double best = 1e300;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto [a, b, c] = m.triangle(f);
    best = std::min(best, point_triangle_distance(p, a, b, c));
  }
  return best;
}

Obb3 labeled(const Vec3& c, int label, double score = 1.0) {
  return Obb3::make(c, 0.0, Vec3(0.5, 0.5, 0.5), label, 3, score);
}

}  // namespace

TEST_CASE("sample_mesh: single triangle, determinism, empty mesh") {
  TriangleMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  const auto pts = sample_mesh(tri, 2000, 7);
  for (const Vec3& p : pts) {
    CHECK(p.x() >= 0.0);
    CHECK(p.y() >= 0.0);
    CHECK(p.x() / 2 + p.y() <= 1.0 + 1e-12);
    CHECK(p.z() == 0.0);
  }
  CHECK(sample_mesh(tri, 2000, 7) == pts);
  CHECK(ego::test::throws_code([] { sample_mesh(TriangleMesh(), 10); }, ErrorCode::kEmptyMesh));
}

TEST_CASE("sample_mesh splits counts by area") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(10, 0, 0), Vec3(13, 0, 0), Vec3(10, 2, 0)};
  m.faces = {{0, 1, 2}, {3, 4, 5}};  // areas 1 and 3
  const auto pts = sample_mesh(m, 100000, 3);
  const double left = static_cast<double>(std::count_if(pts.begin(), pts.end(), [](const Vec3& p) { return p.x() < 5; }));
  CHECK(left / pts.size() == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("point_mesh_dist examples") {
  TriangleMesh tri;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  tri.faces = {{0, 1, 2}};
  const auto d = point_mesh_dist({Vec3(0.2, 0.2, 0), Vec3(0.2, 0.3, 1.5), Vec3(-1, 0, 0)}, tri);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(1.5));
  CHECK(d[2] == doctest::Approx(1.0));
  CHECK(ego::test::throws_code([] { point_mesh_dist({Vec3::Zero()}, TriangleMesh()); }, ErrorCode::kEmptyMesh));
}

TEST_CASE("BVH distances equal brute force on random triangle soups") {
  Rng rng(1);
  TriangleMesh m;
  for (int f = 0; f < 500; ++f) {
    const Vec3 c = random_vec(rng, -2, 2);
    const int base = static_cast<int>(m.vertices.size());
    for (int v = 0; v < 3; ++v) m.vertices.push_back(c + random_vec(rng, -0.3, 0.3));
    m.faces.push_back({base, base + 1, base + 2});
  }
  std::vector<Vec3> pts;
  for (int n = 0; n < 1000; ++n) pts.push_back(random_vec(rng, -3, 3));
  const auto d = point_mesh_dist(pts, m);
  double worst = 0;
  for (size_t n = 0; n < pts.size(); ++n) worst = std::max(worst, std::abs(d[n] - brute_force_dist(pts[n], m)));
  CHECK(worst <= 1e-9);
}

TEST_CASE("surface_metrics identity") {
  SceneSpec spec;
  spec.seed = 1;
  const TriangleMesh m = generate_scene(spec).mesh();
  const SurfaceMetrics s = surface_metrics(m, m);
  // Distances of on-surface samples are zero up to closest-point roundoff.
  CHECK(s.acc == 0.0);
  CHECK(s.comp == 0.0);
  CHECK(s.prec == 1.0);
  CHECK(s.recal == 1.0);
}

TEST_CASE("surface_metrics: plane offset along its normal") {
  const TriangleMesh gt = plane_patch(10, 0.0), pred = plane_patch(10, 0.03);
  const SurfaceMetrics s = surface_metrics(pred, gt);
  CHECK(s.acc == doctest::Approx(0.03).epsilon(0.01));
  CHECK(s.comp == doctest::Approx(0.03).epsilon(0.01));
  CHECK(s.prec == 1.0);
  CHECK(s.recal == 1.0);
}

TEST_CASE("surface_metrics: prediction covering half the ground truth") {
  const TriangleMesh gt = plane_patch(10, 0.0), pred = plane_patch(10, 0.0, 5);
  const SurfaceMetrics s = surface_metrics(pred, gt);
  CHECK(s.prec == 1.0);
  CHECK(s.recal == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("accuracy is invariant under a shared rigid transform") {
  SceneSpec spec;
  spec.seed = 2;
  const Scene scene = generate_scene(spec);
  const TriangleMesh gt = scene.mesh();
  TriangleMesh pred = gt.transformed(Pose::from_translation(Vec3(0.01, 0.02, 0.0)));
  const Pose M(Rotation::about_z(0.7), Vec3(3, 1, -2));
  const SurfaceMetrics a = surface_metrics(pred, gt), b = surface_metrics(pred.transformed(M), gt.transformed(M));
  CHECK(a.acc == doctest::Approx(b.acc).epsilon(1e-9));
  CHECK(a.prec == b.prec);
}

TEST_CASE("accuracy_metrics on points") {
  const TriangleMesh gt = plane_patch(4, 0.0);
  const SurfaceMetrics s = accuracy_metrics({Vec3(1, 1, 0.02), Vec3(2, 2, 0.1)}, gt);
  CHECK(s.acc == doctest::Approx(0.06));
  CHECK(s.prec == 0.5);
  CHECK(s.comp == 0.0);
}

TEST_CASE("default thresholds") {
  const auto t = default_iou_thresholds();
  REQUIRE(t.size() == 11);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 0.5);
}

TEST_CASE("average_precision examples") {
  const std::vector<Obb3> gt{labeled(Vec3(0, 0, 0), 0), labeled(Vec3(2, 0, 0), 1), labeled(Vec3(4, 0, 0), 1)};
  CHECK(average_precision(gt, gt).map == 1.0);
  CHECK(average_precision({}, gt).map == 0.0);

  Obb3 hit = labeled(Vec3(0, 0, 0), 0, 0.9), miss = labeled(Vec3(9, 9, 0), 0, 0.8);
  const DetectionMetrics m = average_precision({hit, miss}, {labeled(Vec3(0, 0, 0), 0)});
  CHECK(m.map == 1.0);
  for (double ap : m.per_class_ap.at(0)) CHECK(ap == 1.0);
  // Reversed scores: precision 0.5 at recall 1.
  hit.score = 0.7;
  CHECK(average_precision({hit, miss}, {labeled(Vec3(0, 0, 0), 0)}).map == doctest::Approx(0.5));
}

TEST_CASE("average_precision details") {
  // Classes without ground truth do not enter the mean.
  const DetectionMetrics m = average_precision({labeled(Vec3(0, 0, 0), 0), labeled(Vec3(5, 5, 0), 2)}, {labeled(Vec3(0, 0, 0), 0)});
  CHECK(m.per_class_ap.size() == 1);
  CHECK(m.map == 1.0);
  // Threshold 0 requires positive overlap.
  const DetectionMetrics touch = average_precision({labeled(Vec3(0.5, 0, 0), 0)}, {labeled(Vec3(0, 0, 0), 0)}, {0.0});
  CHECK(touch.map == 0.0);
  CHECK(ego::test::throws_code([] { average_precision({}, {}, {0.3, 0.1}); }, ErrorCode::kInvalidArgument));
  CHECK(ap_from_matches({1, 0, 1}, 2) == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0));
  CHECK(ap_from_matches({}, 0) == 0.0);
}

TEST_CASE("AP is non-increasing in the IoU threshold") {
  Rng rng(4);
  SceneSpec spec;
  for (int trial = 0; trial < 20; ++trial) {
    spec.seed = trial;
    const Scene scene = generate_scene(spec);
    const auto dets = jitter_detections(scene.obbs, scene, spec.det_noise, rng);
    const DetectionMetrics m = average_precision(dets, scene.obbs);
    for (const auto& [c, ap] : m.per_class_ap)
      for (size_t i = 1; i < ap.size(); ++i) CHECK(ap[i] <= ap[i - 1] + 1e-12);
    const auto at = m.map_at();
    for (size_t i = 1; i < at.size(); ++i) CHECK(at[i] <= at[i - 1] + 1e-12);
  }
}
