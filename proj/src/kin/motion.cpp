#include "motionprior/kin/motion.hpp"

#include "motionprior/error.hpp"
#include "motionprior/log.hpp"
#include "motionprior/kin/rotation.hpp"

namespace motionprior::kin {

Eigen::MatrixXd finite_difference_velocities(const Eigen::MatrixXd& positions, double h) {
  require(h > 0.0, ErrorKind::Precondition, "finite differences need h > 0");
  const Eigen::Index t = positions.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(t, positions.cols());
  if (t < 2) {
    if (t == 1) log_warn("finite_difference_velocities: single frame, velocities set to zero");
    return v;
  }
  for (Eigen::Index i = 1; i < t; ++i) v.row(i) = (positions.row(i) - positions.row(i - 1)) / h;
  v.row(0) = v.row(1);
  return v;
}

Eigen::MatrixXd angular_velocities(const std::vector<Eigen::Matrix3d>& rotations, double h) {
  require(h > 0.0, ErrorKind::Precondition, "angular velocities need h > 0");
  const auto t = static_cast<Eigen::Index>(rotations.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(t, 3);
  if (t < 2) return w;
  for (Eigen::Index i = 1; i < t; ++i)
    w.row(i) = rotation_log(rotations[i] * rotations[i - 1].transpose()).transpose() / h;
  w.row(0) = w.row(1);
  return w;
}

void fill_velocities(std::vector<MotionState>& states, double h) {
  const auto t = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd pos(t, 3 + 3 * kJointCount);
  std::vector<Eigen::Matrix3d> rots(states.size());
  for (Eigen::Index i = 0; i < t; ++i) {
    const MotionState& s = states[i];
    pos.block<1, 3>(i, 0) = s.r.transpose();
    for (int j = 0; j < kJointCount; ++j) pos.block<1, 3>(i, 3 + 3 * j) = s.joints.row(j);
    rots[i] = rodrigues(s.phi);
  }
  const Eigen::MatrixXd v = finite_difference_velocities(pos, h);
  const Eigen::MatrixXd w = angular_velocities(rots, h);
  for (Eigen::Index i = 0; i < t; ++i) {
    MotionState& s = states[i];
    s.r_dot = v.block<1, 3>(i, 0).transpose();
    s.phi_dot = w.row(i).transpose();
    for (int j = 0; j < kJointCount; ++j) s.joints_dot.row(j) = v.block<1, 3>(i, 3 + 3 * j);
  }
}

Eigen::MatrixXd annotate_contacts(const std::vector<JointMat>& joints, const Skeleton& skel,
                                  const ContactThresholds& th) {
  const auto t = static_cast<Eigen::Index>(joints.size());
  const int nc = static_cast<int>(skel.contact_joints.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(t, nc);
  for (Eigen::Index i = 1; i < t; ++i) {
    for (int k = 0; k < nc; ++k) {
      const int j = skel.contact_joints[k];
      const double step = (joints[i].row(j) - joints[i - 1].row(j)).norm();
      const double limit = k < 2 ? th.max_toe_height : th.max_height;
      c(i, k) = (step < th.max_step && joints[i](j, 2) < limit) ? 1.0 : 0.0;
    }
  }
  if (t >= 2) c.row(0) = c.row(1);
  return c;
}

}  // namespace motionprior::kin
