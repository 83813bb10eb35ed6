#include "motionprior/kin/ground.hpp"

#include "motionprior/diff/dual.hpp"
#include "motionprior/error.hpp"

#include <cmath>

namespace motionprior::kin {

void GroundPlane::decompose(const Eigen::Vector3d& up_hint, Eigen::Vector3d& normal, double& offset) const {
  const double n = g.norm();
  require(n > 0.0, ErrorKind::Precondition, "ground plane decomposition needs |g| > 0");
  normal = g / n;
  offset = n;
  if (normal.dot(up_hint) < 0.0) {
    normal = -normal;
    offset = -offset;
  }
}

GroundPlane GroundPlane::from_normal_offset(const Eigen::Vector3d& normal, double offset) {
  GroundPlane p;
  p.g = offset * normal.normalized();
  return p;
}

namespace {

template <class T>
std::array<T, 12> ground_row(const T& gx, const T& gy, const T& gz, const Eigen::Vector3d& up) {
  using std::sqrt;
  using diff::sqrt;
  T n = sqrt(gx * gx + gy * gy + gz * gz);
  T sign(1.0);
  if (diff::value_of(gx) * up.x() + diff::value_of(gy) * up.y() + diff::value_of(gz) * up.z() < 0.0)
    sign = T(-1.0);
  const T nx = sign * gx / n, ny = sign * gy / n, nz = sign * gz / n;
  const T d = sign * n;
  // v = n x e_z = (ny, -nx, 0), c = nz; Q = I + K + K^2 / (1 + c)
  const T vx = ny, vy = -nx;
  const T k = T(1.0) / (T(1.0) + nz);
  std::array<T, 12> p;
  p[0] = T(1.0) - vy * vy * k;
  p[1] = vx * vy * k;
  p[2] = vy;
  p[3] = vx * vy * k;
  p[4] = T(1.0) - vx * vx * k;
  p[5] = -vx;
  p[6] = -vy;
  p[7] = vx;
  p[8] = T(1.0) - (vx * vx + vy * vy) * k;
  p[9] = T(0.0);
  p[10] = T(0.0);
  p[11] = d;
  return p;
}

}  // namespace

diff::Mat ground_params(const Eigen::Vector3d& g, const Eigen::Vector3d& up_hint,
                        Eigen::Matrix<double, 12, 3>* jac) {
  diff::Mat p(1, 12);
  if (GroundPlane{g}.is_default()) {
    p << 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0;
    if (jac) jac->setZero();
    return p;
  }
  using D = diff::Dual<3>;
  const auto row = ground_row<D>(D::seed(g.x(), 0), D::seed(g.y(), 1), D::seed(g.z(), 2), up_hint);
  require(std::isfinite(row[0].v) && std::isfinite(row[8].v), ErrorKind::Numeric,
          "ground normal points straight down");
  for (int a = 0; a < 12; ++a) {
    p(0, a) = row[a].v;
    if (jac)
      for (int d = 0; d < 3; ++d) (*jac)(a, d) = row[a].d[d];
  }
  return p;
}

}  // namespace motionprior::kin
