#pragma once

// SE(3) pose algebra and the gravity-aligned frame construction.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ego {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// World gravity used throughout the scene model (z is up).
inline Vec3 world_gravity() { return Vec3(0.0, 0.0, -1.0); }

Mat3 skew(const Vec3& v);

/// Proper rotation stored as a 3x3 matrix.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Validates orthonormality and det = +1 to within `tol`.
  static Rotation from_matrix(const Mat3& m, double tol = 1e-9);
  /// Skips validation; caller guarantees the matrix is a rotation.
  static Rotation from_matrix_unchecked(const Mat3& m) { return Rotation(m); }
  static Rotation from_axis_angle(const Vec3& omega);
  static Rotation about_z(double angle);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);

  const Mat3& matrix() const { return m_; }
  Vec3 col(int c) const { return m_.col(c); }
  Eigen::Quaterniond quaternion() const;

  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation inverse() const { return Rotation(m_.transpose()); }

  /// Gram-Schmidt re-orthonormalization; use after long compose chains.
  Rotation renormalized() const;
  bool is_valid(double tol = 1e-9) const;
  /// Rotation angle in [0, pi].
  double angle() const;

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Rigid transform x -> R x + t.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Rotation& r, const Vec3& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t) { return Pose(Rotation(), t); }

  Pose operator*(const Pose& o) const {
    return Pose(rotation * o.rotation, rotation * o.translation + translation);
  }
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    const Rotation rt = rotation.inverse();
    return Pose(rt, -(rt * translation));
  }
  Pose renormalized() const { return Pose(rotation.renormalized(), translation); }
};

/// Element of se(3): axis-angle rotation part and translation part.
struct Tangent {
  Vec3 rot = Vec3::Zero();
  Vec3 trans = Vec3::Zero();

  Tangent() = default;
  Tangent(const Vec3& r, const Vec3& t) : rot(r), trans(t) {}
  Tangent operator*(double s) const { return Tangent(rot * s, trans * s); }
  Tangent operator/(double s) const { return Tangent(rot / s, trans / s); }
};

/// Unit gravity direction in world coordinates.
class GravityDir {
 public:
  GravityDir() : g_(world_gravity()) {}
  /// Normalizes `v`; throws InvalidArgument for a zero vector.
  static GravityDir from_vector(const Vec3& v);
  const Vec3& vec() const { return g_; }

 private:
  explicit GravityDir(const Vec3& g) : g_(g) {}
  Vec3 g_;
};

/// Below this rotation angle exp/log use Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;
/// log is undefined within this distance of a rotation by pi.
inline constexpr double kPiMargin = 1e-6;

Pose se3_exp(const Tangent& xi);
/// Throws NearPiRotation when the rotation angle is within kPiMargin of pi.
Tangent se3_log(const Pose& T);
/// log(Ta^-1 * Tb).
Tangent pose_boxminus(const Pose& Ta, const Pose& Tb);

Rotation so3_exp(const Vec3& omega);
/// Throws NearPiRotation like se3_log.
Vec3 so3_log(const Rotation& R);

/// Builds the gravity-aligned rotation [g, n(d_z x g), n(d_z)] with
/// d_z = r_z - (g . r_z) g, where r_z is the camera viewing axis.
/// Throws DegenerateGravityAlignment if |d_z| <= 1e-6.
Rotation gravity_align(const Rotation& R_wc, const GravityDir& g);

/// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

}  // namespace ego
