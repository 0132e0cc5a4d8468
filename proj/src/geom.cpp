#include "ego/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ego/error.hpp"

namespace ego {

namespace {

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

// (theta - sin theta) / theta^3
double coef_c(double theta) {
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (theta - std::sin(theta)) / (theta * theta * theta);
}

// (1 - cos theta) / theta^2, cancellation-free.
double coef_b(double theta) {
  if (theta < kSmallAngle) return 0.5;
  const double s = std::sin(0.5 * theta);
  return 2.0 * s * s / (theta * theta);
}

// Coefficient of W^2 in the inverse left Jacobian.
double coef_vinv(double theta) {
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return (1.0 - half / std::tan(half)) / (theta * theta);
}

Mat3 left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  return Mat3::Identity() + coef_b(theta) * W + coef_c(theta) * W * W;
}

Mat3 left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  return Mat3::Identity() - 0.5 * W + coef_vinv(theta) * W * W;
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<  0.0,   -v.z(),  v.y(),
        v.z(),  0.0,   -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

Rotation Rotation::from_matrix(const Mat3& m, double tol) {
  Rotation r(m);
  if (!r.is_valid(tol)) fail(ErrorCode::kInvalidArgument, "matrix is not a proper rotation");
  return r;
}

Rotation Rotation::from_axis_angle(const Vec3& omega) { return so3_exp(omega); }

Rotation Rotation::about_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  // clang-format off
  m << c,  -s,   0.0,
       s,   c,   0.0,
       0.0, 0.0, 1.0;
  // clang-format on
  return Rotation(m);
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  return Rotation(q.normalized().toRotationMatrix());
}

Eigen::Quaterniond Rotation::quaternion() const {
  Eigen::Quaterniond q(m_);
  q.normalize();
  // Canonical hemisphere so serialized poses are unique.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

Rotation Rotation::renormalized() const {
  Vec3 x = m_.col(0).normalized();
  Vec3 y = (m_.col(1) - x.dot(m_.col(1)) * x).normalized();
  Vec3 z = x.cross(y);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Rotation(m);
}

bool Rotation::is_valid(double tol) const {
  if (!m_.allFinite()) return false;
  const Mat3 e = m_.transpose() * m_ - Mat3::Identity();
  if (e.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m_.determinant() - 1.0) <= tol;
}

double Rotation::angle() const {
  const double c = 0.5 * (m_.trace() - 1.0);
  const double s = 0.5 * vee(m_ - m_.transpose()).norm();
  return std::atan2(s, c);
}

GravityDir GravityDir::from_vector(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::kInvalidArgument, "gravity vector must be non-zero");
  return GravityDir(v / n);
}

Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  const double a = theta < kSmallAngle ? 1.0 : std::sin(theta) / theta;
  return Rotation::from_matrix_unchecked(Mat3::Identity() + a * W + coef_b(theta) * W * W);
}

Vec3 so3_log(const Rotation& R) {
  const Mat3& m = R.matrix();
  const Vec3 v = vee(m - m.transpose());  // 2 sin(theta) axis
  const double c = std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const double s = 0.5 * v.norm();
  const double theta = std::atan2(s, c);
  if (theta > std::numbers::pi - kPiMargin) {
    fail(ErrorCode::kNearPiRotation, "rotation angle within 1e-6 of pi");
  }
  if (theta < kSmallAngle) return 0.5 * v;
  if (c < -0.99) {
    // sin(theta) is small: recover the axis from the symmetric part.
    const Mat3 B = 0.5 * (m + m.transpose()) - c * Mat3::Identity();
    int i = 0;
    B.diagonal().maxCoeff(&i);
    Vec3 axis = B.col(i) / std::sqrt(B(i, i) * (1.0 - c));
    axis.normalize();
    if (axis.dot(v) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * v;
}

Pose se3_exp(const Tangent& xi) {
  return Pose(so3_exp(xi.rot), left_jacobian(xi.rot) * xi.trans);
}

Tangent se3_log(const Pose& T) {
  const Vec3 omega = so3_log(T.rotation);
  return Tangent(omega, left_jacobian_inverse(omega) * T.translation);
}

Tangent pose_boxminus(const Pose& Ta, const Pose& Tb) { return se3_log(Ta.inverse() * Tb); }

Rotation gravity_align(const Rotation& R_wc, const GravityDir& g) {
  const Vec3& gw = g.vec();
  const Vec3 rz = R_wc.col(2);
  const Vec3 dz = rz - gw.dot(rz) * gw;
  const double n = dz.norm();
  if (n <= 1e-6) {
    fail(ErrorCode::kDegenerateGravityAlignment, "camera viewing axis is parallel to gravity");
  }
  const Vec3 z = dz / n;
  Mat3 m;
  m.col(0) = gw;
  m.col(1) = z.cross(gw).normalized();
  m.col(2) = z;
  return Rotation::from_matrix_unchecked(m);
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  w -= std::numbers::pi;
  if (w >= std::numbers::pi) w -= kTwoPi;
  return w;
}

}  // namespace ego
