#include "motionprior/kin/rotation.hpp"

namespace motionprior::kin {

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa) {
  const Rot9<double> r = rodrigues<double>(aa.x(), aa.y(), aa.z());
  Eigen::Matrix3d m;
  m << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  return m;
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d s(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
                          0.5 * (r(1, 0) - r(0, 1)));
  const double c = 0.5 * (r.trace() - 1.0);
  if (c > -0.9) {
    Rot9<double> rr{r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2)};
    const auto v = rotation_log_smooth<double>(rr);
    return {v[0], v[1], v[2]};
  }
  // near pi: recover the axis from the symmetric part
  const double theta = std::atan2(s.norm(), c);
  const Eigen::Matrix3d sym = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
  Eigen::Index k = 0;
  sym.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = sym.col(k);
  const double n = axis.norm();
  if (n < 1e-15) return Eigen::Vector3d::Zero();
  axis /= n;
  if (axis.dot(s) < 0.0) axis = -axis;
  return axis * theta;
}

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) = -u.col(2);
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace motionprior::kin
