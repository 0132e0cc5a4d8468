#pragma once

// Pinhole and Kannala-Brandt fisheye camera models.
//
// Pixel coordinates are continuous: pixel (col, row) covers
// [col, col+1) x [row, row+1) and its center sits at (col+0.5, row+0.5).
// Depth conventions differ per model: pinhole depth is z-depth, fisheye depth
// is Euclidean distance along the ray.

#include <array>
#include <variant>
#include <vector>

#include "ego/geom.hpp"

namespace ego {

struct PinholeCamera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  bool is_valid() const { return fx > 0 && fy > 0 && width >= 1 && height >= 1; }
};

struct FisheyeCamera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  std::array<double, 4> k{0.0, 0.0, 0.0, 0.0};
  int width = 1, height = 1;
  double valid_radius = 0.0;

  bool is_valid() const;
  /// r(theta) = theta + k1 theta^3 + k2 theta^5 + k3 theta^7 + k4 theta^9.
  double distort(double theta) const;
  double distort_derivative(double theta) const;
  /// Inverts distort() with damped Newton; throws NoConvergence on failure.
  double undistort(double r) const;
};

using Camera = std::variant<PinholeCamera, FisheyeCamera>;

struct Pixel {
  double u = 0.0, v = 0.0;
  bool valid = false;
};

int width_of(const Camera& cam);
int height_of(const Camera& cam);
bool is_valid(const Camera& cam);

Pixel project(const PinholeCamera& cam, const Vec3& p_cam);
Pixel project(const FisheyeCamera& cam, const Vec3& p_cam);
Pixel project(const Camera& cam, const Vec3& p_cam);

/// Inverse of project() at the given depth (z for pinhole, ray length for fisheye).
Vec3 unproject(const PinholeCamera& cam, const Pixel& px, double depth);
Vec3 unproject(const FisheyeCamera& cam, const Pixel& px, double depth);
Vec3 unproject(const Camera& cam, const Pixel& px, double depth);

/// Unit ray direction through a pixel.
Vec3 pixel_ray(const Camera& cam, const Pixel& px);

/// Depth value of a camera-frame point under the camera's depth convention.
double depth_of(const Camera& cam, const Vec3& p_cam);

/// Largest-FoV pinhole of the given size matching the fisheye's valid-radius
/// field of view along the image diagonal; half-FoV capped at 85 degrees.
PinholeCamera max_linear(const FisheyeCamera& fe, int target_width, int target_height);

/// Common linear RGB-D calibration (640x480, f = 577.87) used for FoV comparisons.
PinholeCamera scannet_linear();

/// For every destination pixel, the continuous source-camera coordinates of
/// the same viewing ray.
struct RectifyMap {
  int width = 0, height = 0;
  std::vector<Vec2> src;        // row-major, width*height
  std::vector<unsigned char> valid;
};

RectifyMap rectify_map(const Camera& src, const PinholeCamera& dst);

/// Half field of view (radians) at the valid radius of a fisheye.
double fisheye_half_fov(const FisheyeCamera& fe);

}  // namespace ego
