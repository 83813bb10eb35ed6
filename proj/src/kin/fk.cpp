#include "motionprior/kin/fk.hpp"

#include "motionprior/error.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kin/rotation.hpp"

namespace motionprior::kin {

FkOutput forward_kinematics(const Skeleton& skel, const Eigen::VectorXd& beta, const Eigen::Vector3d& r,
                            const Eigen::Matrix3d& root_rot, const std::vector<Eigen::Matrix3d>& pose_rot) {
  require(static_cast<int>(pose_rot.size()) == skel.joint_count() - 1, ErrorKind::DimensionMismatch,
          "fk: one rotation per bone expected");
  require(r.allFinite() && root_rot.allFinite() && beta.allFinite(), ErrorKind::Precondition,
          "fk: non-finite input");
  using diff::Mat;
  Mat rr(1, 3), rootm(1, 9), pose(1, 9 * pose_rot.size()), b(1, beta.size());
  rr.row(0) = r.transpose();
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) rootm(0, 3 * a + c) = root_rot(a, c);
  for (std::size_t k = 0; k < pose_rot.size(); ++k)
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) pose(0, 9 * k + 3 * a + c) = pose_rot[k](a, c);
  b.row(0) = beta.transpose();
  Mat joints, markers, globals;
  kernels::fk_forward(skel, rr, rootm, pose, b, joints, markers, globals, kernels::Exec::Serial);
  FkOutput out;
  const int n = skel.joint_count();
  require(n == kJointCount, ErrorKind::Topology, "state layout expects 22 joints");
  for (int j = 0; j < n; ++j) out.joints.row(j) = joints.block(0, 3 * j, 1, 3);
  out.markers.resize(skel.marker_count(), 3);
  for (int m = 0; m < skel.marker_count(); ++m) out.markers.row(m) = markers.block(0, 3 * m, 1, 3);
  out.globals.resize(n);
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) out.globals[j](a, c) = globals(0, 9 * j + 3 * a + c);
  return out;
}

FkOutput forward_kinematics(const Skeleton& skel, const Eigen::VectorXd& beta, const Eigen::Vector3d& r,
                            const Eigen::Vector3d& phi, const PoseMat& theta) {
  require(phi.allFinite() && theta.allFinite(), ErrorKind::Precondition, "fk: non-finite angles");
  std::vector<Eigen::Matrix3d> pose(kBoneCount);
  for (int k = 0; k < kBoneCount; ++k) pose[k] = rodrigues(Eigen::Vector3d(theta.row(k).transpose()));
  return forward_kinematics(skel, beta, r, rodrigues(phi), pose);
}

void refresh_joints(const Skeleton& skel, const Eigen::VectorXd& beta, MotionState& state) {
  state.joints = forward_kinematics(skel, beta, state.r, state.phi, state.theta).joints;
}

}  // namespace motionprior::kin
