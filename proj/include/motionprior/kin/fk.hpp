#pragma once

#include "motionprior/kin/state.hpp"

#include <vector>

namespace motionprior::kin {

struct FkOutput {
  JointMat joints;
  Eigen::MatrixXd markers;  // M x 3
  std::vector<Eigen::Matrix3d> globals;
};

/// Joint positions from root translation, root axis-angle and body axis-angles.
FkOutput forward_kinematics(const Skeleton& skel, const Eigen::VectorXd& beta, const Eigen::Vector3d& r,
                            const Eigen::Vector3d& phi, const PoseMat& theta);

/// Same with rotation matrices (root, then one per bone).
FkOutput forward_kinematics(const Skeleton& skel, const Eigen::VectorXd& beta, const Eigen::Vector3d& r,
                            const Eigen::Matrix3d& root_rot, const std::vector<Eigen::Matrix3d>& pose_rot);

/// Fills state.joints from (r, phi, theta) and beta.
void refresh_joints(const Skeleton& skel, const Eigen::VectorXd& beta, MotionState& state);

}  // namespace motionprior::kin
