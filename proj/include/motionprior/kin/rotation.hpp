#pragma once

#include "motionprior/diff/dual.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace motionprior::kin {

// Rotation helpers. Matrices are stored row-major as 9 scalars when templated
// so the same code runs on doubles and on forward-mode duals.

template <class T>
using Rot9 = std::array<T, 9>;

/// Axis-angle to rotation matrix (Rodrigues), smooth through zero.
template <class T>
Rot9<T> rodrigues(const T& x, const T& y, const T& z) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  using diff::cos;
  using diff::sin;
  using diff::sqrt;
  const T th2 = x * x + y * y + z * z;
  T a, b;
  if (diff::value_of(th2) < 1e-12) {
    a = T(1.0) - th2 / 6.0;
    b = T(0.5) - th2 / 24.0;
  } else {
    const T th = sqrt(th2);
    a = sin(th) / th;
    b = (T(1.0) - cos(th)) / th2;
  }
  // R = I + a K + b K^2,  K = [v]_x
  Rot9<T> r;
  r[0] = T(1.0) - b * (y * y + z * z);
  r[1] = b * x * y - a * z;
  r[2] = b * x * z + a * y;
  r[3] = b * x * y + a * z;
  r[4] = T(1.0) - b * (x * x + z * z);
  r[5] = b * y * z - a * x;
  r[6] = b * x * z - a * y;
  r[7] = b * y * z + a * x;
  r[8] = T(1.0) - b * (x * x + y * y);
  return r;
}

/// Rotation log map for angles away from pi (the differentiable branch).
template <class T>
std::array<T, 3> rotation_log_smooth(const Rot9<T>& r) {
  using std::atan2;
  using std::sqrt;
  using diff::atan2;
  using diff::sqrt;
  const T sx = (r[7] - r[5]) * 0.5;
  const T sy = (r[2] - r[6]) * 0.5;
  const T sz = (r[3] - r[1]) * 0.5;
  const T c = (r[0] + r[4] + r[8] - 1.0) * 0.5;
  const T s2 = sx * sx + sy * sy + sz * sz;
  T factor;
  if (diff::value_of(s2) < 1e-14) {
    // theta/sin(theta) ~ 1 + theta^2/6 with sin^2 ~ theta^2
    factor = T(1.0) + s2 / 6.0;
  } else {
    const T s = sqrt(s2);
    factor = atan2(s, c) / s;
  }
  return {sx * factor, sy * factor, sz * factor};
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa);

/// Log map valid over the full range, including angles near pi.
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r);

Eigen::Matrix3d rot_x(double a);
Eigen::Matrix3d rot_y(double a);
Eigen::Matrix3d rot_z(double a);

/// Projects a nearly orthogonal matrix to the closest rotation.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

}  // namespace motionprior::kin
