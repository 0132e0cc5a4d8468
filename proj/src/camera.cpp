#include "ego/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ego/error.hpp"

namespace ego {

namespace {

constexpr double kMinZ = 1e-6;
constexpr int kNewtonIters = 20;
constexpr double kNewtonTol = 1e-10;
constexpr double kMaxLinearHalfFov = 85.0 * std::numbers::pi / 180.0;

bool in_bounds(double u, double v, int w, int h) { return u >= 0.0 && v >= 0.0 && u < w && v < h; }

}  // namespace

double FisheyeCamera::distort(double theta) const {
  const double t2 = theta * theta;
  return theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
}

double FisheyeCamera::distort_derivative(double theta) const {
  const double t2 = theta * theta;
  return 1.0 + t2 * (3.0 * k[0] + t2 * (5.0 * k[1] + t2 * (7.0 * k[2] + t2 * 9.0 * k[3])));
}

double FisheyeCamera::undistort(double r) const {
  if (r <= 0.0) return 0.0;
  double theta = r;
  for (int it = 0; it < kNewtonIters; ++it) {
    const double f = distort(theta) - r;
    const double df = distort_derivative(theta);
    if (!(df > 0.0)) break;
    double step = f / df;
    // Damping keeps the iterate in the monotone region near zero.
    while (theta - step < 0.0) step *= 0.5;
    theta -= step;
    if (std::abs(step) < kNewtonTol) return theta;
  }
  fail(ErrorCode::kNoConvergence, "fisheye polynomial inverse did not converge");
}

bool FisheyeCamera::is_valid() const {
  if (!(fx > 0 && fy > 0 && width >= 1 && height >= 1 && valid_radius > 0)) return false;
  const double corner = std::max({std::hypot(cx, cy), std::hypot(width - cx, cy), std::hypot(cx, height - cy),
                                  std::hypot(width - cx, height - cy)});
  if (valid_radius > corner) return false;
  // r(theta) must be strictly increasing up to the valid radius.
  const double rmax = valid_radius / std::max(fx, fy);
  double theta = 0.0;
  while (distort(theta) < rmax) {
    if (distort_derivative(theta) <= 0.0 || theta > std::numbers::pi) return false;
    theta += 1e-3;
  }
  return true;
}

int width_of(const Camera& cam) {
  return std::visit([](const auto& c) { return c.width; }, cam);
}
int height_of(const Camera& cam) {
  return std::visit([](const auto& c) { return c.height; }, cam);
}
bool is_valid(const Camera& cam) {
  return std::visit([](const auto& c) { return c.is_valid(); }, cam);
}

Pixel project(const PinholeCamera& cam, const Vec3& p) {
  Pixel px;
  if (p.z() <= kMinZ) return px;
  px.u = cam.fx * p.x() / p.z() + cam.cx;
  px.v = cam.fy * p.y() / p.z() + cam.cy;
  px.valid = in_bounds(px.u, px.v, cam.width, cam.height);
  return px;
}

Pixel project(const FisheyeCamera& cam, const Vec3& p) {
  Pixel px;
  const double rho = std::hypot(p.x(), p.y());
  if (rho < 1e-12) {
    if (p.z() <= 0.0) return px;
    px.u = cam.cx;
    px.v = cam.cy;
  } else {
    const double theta = std::atan2(rho, p.z());
    const double r = cam.distort(theta);
    px.u = cam.fx * r * p.x() / rho + cam.cx;
    px.v = cam.fy * r * p.y() / rho + cam.cy;
  }
  px.valid = in_bounds(px.u, px.v, cam.width, cam.height) &&
             std::hypot(px.u - cam.cx, px.v - cam.cy) <= cam.valid_radius;
  return px;
}

Pixel project(const Camera& cam, const Vec3& p) {
  return std::visit([&](const auto& c) { return project(c, p); }, cam);
}

Vec3 unproject(const PinholeCamera& cam, const Pixel& px, double depth) {
  return Vec3((px.u - cam.cx) / cam.fx * depth, (px.v - cam.cy) / cam.fy * depth, depth);
}

Vec3 unproject(const FisheyeCamera& cam, const Pixel& px, double depth) {
  const double mx = (px.u - cam.cx) / cam.fx;
  const double my = (px.v - cam.cy) / cam.fy;
  const double r = std::hypot(mx, my);
  if (r < 1e-15) return Vec3(0.0, 0.0, depth);
  const double theta = cam.undistort(r);
  const double s = std::sin(theta) / r;
  return Vec3(s * mx, s * my, std::cos(theta)) * depth;
}

Vec3 unproject(const Camera& cam, const Pixel& px, double depth) {
  return std::visit([&](const auto& c) { return unproject(c, px, depth); }, cam);
}

Vec3 pixel_ray(const Camera& cam, const Pixel& px) { return unproject(cam, px, 1.0).normalized(); }

double depth_of(const Camera& cam, const Vec3& p) {
  return std::holds_alternative<PinholeCamera>(cam) ? p.z() : p.norm();
}

double fisheye_half_fov(const FisheyeCamera& fe) {
  return fe.undistort(fe.valid_radius / fe.fx);
}

PinholeCamera max_linear(const FisheyeCamera& fe, int target_width, int target_height) {
  const double half_fov = std::min(fisheye_half_fov(fe), kMaxLinearHalfFov);
  const double half_diag = 0.5 * std::hypot(target_width, target_height);
  const double f = half_diag / std::tan(half_fov);
  PinholeCamera lin;
  lin.fx = lin.fy = f;
  lin.cx = 0.5 * target_width;
  lin.cy = 0.5 * target_height;
  lin.width = target_width;
  lin.height = target_height;
  return lin;
}

PinholeCamera scannet_linear() {
  PinholeCamera c;
  c.fx = c.fy = 577.87;
  c.width = 640;
  c.height = 480;
  c.cx = 320.0;
  c.cy = 240.0;
  return c;
}

RectifyMap rectify_map(const Camera& src, const PinholeCamera& dst) {
  RectifyMap map;
  map.width = dst.width;
  map.height = dst.height;
  map.src.resize(static_cast<size_t>(dst.width) * dst.height);
  map.valid.resize(map.src.size(), 0);
  for (int row = 0; row < dst.height; ++row) {
    for (int col = 0; col < dst.width; ++col) {
      const Pixel q{col + 0.5, row + 0.5, true};
      const Vec3 ray = unproject(dst, q, 1.0);
      const Pixel s = project(src, ray);
      const size_t i = static_cast<size_t>(row) * dst.width + col;
      map.src[i] = Vec2(s.u, s.v);
      map.valid[i] = s.valid ? 1 : 0;
    }
  }
  return map;
}

}  // namespace ego
