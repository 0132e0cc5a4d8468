#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ego/camera.hpp"
#include "ego/error.hpp"
#include "ego/image.hpp"
#include "ego/scenegen.hpp"
#include "test_util.hpp"

using namespace ego;
constexpr double kPi = std::numbers::pi;

namespace {

FisheyeCamera equidistant(double f, int size, double half_fov) {
  FisheyeCamera c;
  c.fx = c.fy = f;
  c.cx = c.cy = 0.5 * size;
  c.width = c.height = size;
  c.valid_radius = f * half_fov;
  return c;
}

// Random in-FoV point: direction within `half_fov` of the optical axis.
Vec3 random_in_fov(Rng& rng, double half_fov) {
  const double theta = rng.uniform(0.0, half_fov), phi = rng.uniform(-kPi, kPi);
  return Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)) *
         rng.uniform(0.5, 5.0);
}

}  // namespace

TEST_CASE("pinhole projects the optical axis to the principal point") {
  const PinholeCamera cam{150, 150, 120, 120, 240, 240};
  const Pixel px = project(cam, Vec3(0, 0, 1));
  CHECK(px.valid);
  CHECK(px.u == 120.0);
  CHECK(px.v == 120.0);
  CHECK_FALSE(project(cam, Vec3(0, 0, -1)).valid);
  CHECK_FALSE(project(cam, Vec3(10, 0, 1)).valid);
}

TEST_CASE("equidistant fisheye projects the optical axis to the center") {
  const FisheyeCamera cam = equidistant(100, 320, 1.4);
  const Pixel px = project(cam, Vec3(0, 0, 1));
  CHECK(px.valid);
  CHECK(px.u == 160.0);
  CHECK(px.v == 160.0);
}

TEST_CASE("pinhole unproject examples and round trip") {
  const PinholeCamera cam{150, 150, 120, 120, 240, 240};
  const Vec3 p = unproject(cam, Pixel{120, 120, true}, 2.0);
  CHECK((p - Vec3(0, 0, 2)).norm() < 1e-15);
  Rng rng(1);
  for (int n = 0; n < 1000; ++n) {
    const Pixel px{rng.uniform(0, 240), rng.uniform(0, 240), true};
    const double d = rng.uniform(0.1, 10);
    const Vec3 q = unproject(cam, px, d);
    CHECK(q.z() == doctest::Approx(d));
    const Pixel back = project(cam, q);
    CHECK(std::abs(back.u - px.u) < 1e-6);
    CHECK(std::abs(back.v - px.v) < 1e-6);
  }
}

TEST_CASE("equidistant fisheye: pixel at f*pi/4 is 45 degrees off axis") {
  const FisheyeCamera cam = equidistant(100, 320, 1.4);
  const Vec3 p = unproject(cam, Pixel{160 + 100 * kPi / 4, 160, true}, 1.0);
  CHECK(p.norm() == doctest::Approx(1.0));
  CHECK(p.x() == doctest::Approx(std::sqrt(0.5)));
  CHECK(std::abs(p.y()) < 1e-12);
  CHECK(p.z() == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("fisheye project/unproject round trips inside the valid radius") {
  const FisheyeCamera cam = synthetic_fisheye(256);
  const double half_fov = fisheye_half_fov(cam);
  CHECK(half_fov == doctest::Approx(75.0 * kPi / 180.0));
  Rng rng(2);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 p = random_in_fov(rng, half_fov * 0.999);
    const Pixel px = project(cam, p);
    REQUIRE(px.valid);
    const Vec3 q = unproject(cam, px, p.norm());
    CHECK((q.normalized() - p.normalized()).norm() < 1e-6);
    CHECK(q.norm() == doctest::Approx(p.norm()));
    const Pixel back = project(cam, q);
    CHECK(std::abs(back.u - px.u) < 1e-6);
    CHECK(std::abs(back.v - px.v) < 1e-6);
  }
}

TEST_CASE("fisheye validity respects the valid radius") {
  const FisheyeCamera cam = synthetic_fisheye(256);
  const double half_fov = fisheye_half_fov(cam);
  const Vec3 outside(std::sin(half_fov + 0.05), 0, std::cos(half_fov + 0.05));
  CHECK_FALSE(project(cam, outside).valid);
  CHECK_FALSE(project(cam, Vec3(0, 0, -1)).valid);
}

TEST_CASE("fisheye radius increases strictly with theta") {
  const FisheyeCamera cam = synthetic_fisheye(256);
  const double half_fov = fisheye_half_fov(cam);
  double prev = -1.0;
  for (int n = 0; n <= 1000; ++n) {
    const double r = cam.distort(half_fov * n / 1000.0);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("fisheye undistort fails loudly on a non-invertible calibration") {
  FisheyeCamera cam = synthetic_fisheye(256);
  cam.k = {-1.0, 0.0, 0.0, 0.0};  // r(theta) peaks at theta = 1/sqrt(3)
  bool threw = false;
  try {
    cam.undistort(1.0);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kNoConvergence;
  }
  CHECK(threw);
}

TEST_CASE("max_linear closed forms") {
  // 90 degree half-FoV is capped at 85 degrees.
  const FisheyeCamera wide = equidistant(100, 240, kPi / 2);
  const PinholeCamera a = max_linear(wide, 240, 240);
  const double half_diag = 240 * std::sqrt(2.0) / 2;
  CHECK(a.fx == doctest::Approx(half_diag / std::tan(85.0 * kPi / 180.0)));
  CHECK(a.fx == a.fy);
  CHECK(a.is_valid());
  // 45 degree half-FoV: focal equals the half diagonal.
  const FisheyeCamera narrow = equidistant(100, 240, kPi / 4);
  const PinholeCamera b = max_linear(narrow, 240, 240);
  CHECK(b.fx == doctest::Approx(half_diag));
  CHECK(b.cx == 120.0);
}

TEST_CASE("max_linear never exceeds the fisheye field of view") {
  for (int size : {64, 128, 256, 512}) {
    const FisheyeCamera fe = synthetic_fisheye(size);
    const PinholeCamera lin = max_linear(fe, size, size);
    const double diag_fov = std::atan(0.5 * std::hypot(lin.width, lin.height) / lin.fx);
    CHECK(diag_fov <= fisheye_half_fov(fe) + 1e-12);
  }
}

TEST_CASE("rectify_map identity and center examples") {
  const PinholeCamera pin{150, 150, 120, 100, 240, 200};
  const RectifyMap id = rectify_map(pin, pin);
  double worst = 0.0;
  for (int r = 0; r < pin.height; ++r)
    for (int c = 0; c < pin.width; ++c) {
      const size_t i = static_cast<size_t>(r) * pin.width + c;
      CHECK(id.valid[i]);
      worst = std::max(worst, (id.src[i] - Vec2(c + 0.5, r + 0.5)).norm());
    }
  CHECK(worst < 1e-9);

  const FisheyeCamera fe = synthetic_fisheye(256);
  const PinholeCamera lin = max_linear(fe, 128, 128);
  const RectifyMap m = rectify_map(fe, lin);
  // Pixel (63, 63) is centered at (63.5, 63.5); the optical axis sits at (64, 64).
  const Pixel corner = project(fe, pixel_ray(lin, Pixel{64.0, 64.0, true}));
  CHECK(std::abs(corner.u - fe.cx) < 1e-9);
  CHECK(std::abs(corner.v - fe.cy) < 1e-9);
  CHECK(m.valid[63 * 128 + 63]);
}

TEST_CASE("rectified fisheye depth of a plane matches a pinhole render") {
  TriangleMesh plane;
  plane.vertices = {Vec3(-50, -50, 2), Vec3(50, -50, 2), Vec3(50, 50, 2), Vec3(-50, 50, 2)};
  plane.faces = {{0, 1, 2}, {0, 2, 3}};
  const SceneRenderer renderer(plane);
  const FisheyeCamera fe = synthetic_fisheye(256);
  const PinholeCamera lin = max_linear(fe, 200, 200);
  const Pose T = Pose::identity();
  const DepthMap fish = renderer.render(fe, T);
  const DepthMap direct = renderer.render(lin, T);
  const DepthMap rect = rectify_depth(fish, fe, rectify_map(fe, lin), lin);
  REQUIRE(rect.width == direct.width);
  double worst = 0.0;
  size_t compared = 0;
  for (size_t i = 0; i < rect.data.size(); ++i) {
    if (!DepthMap::is_valid_depth(rect.data[i]) || !DepthMap::is_valid_depth(direct.data[i])) continue;
    worst = std::max(worst, std::abs(static_cast<double>(rect.data[i]) - direct.data[i]));
    ++compared;
  }
  CHECK(compared > rect.data.size() / 2);
  CHECK(worst < 0.04);
}

TEST_CASE("depth conventions") {
  const Vec3 p(1, 2, 2);
  CHECK(depth_of(PinholeCamera{1, 1, 0, 0, 1, 1}, p) == 2.0);
  CHECK(depth_of(synthetic_fisheye(64), p) == 3.0);
}
