#pragma once

// Rigid-body helpers shared by the tracker and the planner.
// Quaternions are stored as Eigen::Vector4 in (w, x, y, z) order so that raw
// optimizer parameters and their gradients live in the same container.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace artic {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Rotation matrix of a (w,x,y,z) quaternion; assumes unit norm.
template <typename T>
Eigen::Matrix<T, 3, 3> quat_to_matrix(const Eigen::Matrix<T, 4, 1>& q) {
  const T w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<T, 3, 3> r;
  r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
      T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
      T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
  return r;
}

/// Partial derivatives of quat_to_matrix w.r.t. (w,x,y,z), contracted with an
/// upstream matrix gradient: returns sum_ij G_ij * dR_ij/dq_k.
inline Vec4 quat_matrix_vjp(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 dw, dx, dy, dz;
  dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  return Vec4((g.array() * dw.array()).sum(), (g.array() * dx.array()).sum(),
              (g.array() * dy.array()).sum(), (g.array() * dz.array()).sum());
}

/// Gradient of f(q / |q|) w.r.t. q, given the gradient w.r.t. the unit quaternion.
inline Vec4 normalize_vjp(const Vec4& q, const Vec4& g_unit) {
  const double n = q.norm();
  const Vec4 u = q / n;
  return (g_unit - u * u.dot(g_unit)) / n;
}

inline Vec4 quat_identity() { return Vec4(1, 0, 0, 0); }

inline Vec4 quat_from_eigen(const Eigen::Quaterniond& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }

inline Eigen::Quaterniond quat_to_eigen(const Vec4& q) { return Eigen::Quaterniond(q[0], q[1], q[2], q[3]); }

inline Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
  return quat_from_eigen(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

inline Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

/// Unit quaternion with w >= 0.
inline Vec4 quat_canonical(const Vec4& q) {
  Vec4 u = q.normalized();
  if (u[0] < 0) u = -u;
  return u;
}

/// Angle of the rotation taking a to b, in radians.
inline double quat_angle_between(const Vec4& a, const Vec4& b) {
  const double d = std::abs(a.normalized().dot(b.normalized()));
  return 2.0 * std::acos(std::min(1.0, d));
}

/// Proper rigid transform x -> rotation * x + translation.
struct Rigid {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Rigid identity() { return {}; }
  static Rigid from_quat(const Vec4& q, const Vec3& t) { return {quat_to_matrix<double>(q.normalized()), t}; }

  Vec3 operator*(const Vec3& x) const { return rotation * x + translation; }
  Rigid operator*(const Rigid& o) const { return {rotation * o.rotation, rotation * o.translation + translation}; }
  Rigid inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
  Vec4 quat() const { return quat_canonical(quat_from_eigen(Eigen::Quaterniond(rotation))); }
};

/// Rotation vector of a unit quaternion; templated so it can run on autodiff scalars.
/// Picks the shortest rotation (w >= 0) and switches to a series near zero angle.
template <typename T>
Eigen::Matrix<T, 3, 1> quat_log(Eigen::Matrix<T, 4, 1> q) {
  using std::atan2;
  using std::sqrt;
  if (q[0] < T(0)) q = -q;
  const Eigen::Matrix<T, 3, 1> v = q.template tail<3>();
  const T s2 = v.squaredNorm();
  if (s2 < T(1e-16)) {
    // 2*atan(s/w)/s ~ 2/w * (1 - s^2 / (3 w^2))
    return v * (T(2) / q[0]) * (T(1) - s2 / (T(3) * q[0] * q[0]));
  }
  const T s = sqrt(s2);
  return v * (T(2) * atan2(s, q[0]) / s);
}

/// se(3) logarithm of (R(q), p) as (rho, omega) with rho = V^-1 p.
template <typename T>
Eigen::Matrix<T, 6, 1> se3_log(const Eigen::Matrix<T, 4, 1>& q, const Eigen::Matrix<T, 3, 1>& p) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Eigen::Matrix<T, 3, 1> omega = quat_log<T>(q);
  const T theta2 = omega.squaredNorm();
  Eigen::Matrix<T, 3, 3> wx;
  wx << T(0), -omega[2], omega[1], omega[2], T(0), -omega[0], -omega[1], omega[0], T(0);
  T coeff;
  if (theta2 < T(1e-4)) {
    coeff = T(1) / T(12) + theta2 / T(720);
  } else {
    const T theta = sqrt(theta2);
    coeff = (T(1) - theta * sin(theta) / (T(2) * (T(1) - cos(theta)))) / theta2;
  }
  const Eigen::Matrix<T, 3, 3> vinv = Eigen::Matrix<T, 3, 3>::Identity() - T(0.5) * wx + coeff * wx * wx;
  Eigen::Matrix<T, 6, 1> out;
  out.template head<3>() = vinv * p;
  out.template tail<3>() = omega;
  return out;
}

/// Rotation vector of a rotation matrix.
inline Vec3 so3_log(const Mat3& r) {
  return quat_log<double>(quat_from_eigen(Eigen::Quaterniond(r).normalized()));
}

inline Mat3 so3_exp(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0;
  return m;
}

}  // namespace artic
