#pragma once

#include "motionprior/diff/tape.hpp"
#include "motionprior/kin/skeleton.hpp"

#include <Eigen/Dense>

#include <vector>

namespace motionprior::kin {

/// Offsets of the 207-scalar flattened state.
namespace state_layout {
inline constexpr int kR = 0;
inline constexpr int kRDot = 3;
inline constexpr int kPhi = 6;
inline constexpr int kPhiDot = 9;
inline constexpr int kTheta = 12;
inline constexpr int kJoints = 75;
inline constexpr int kJointsDot = 141;
inline constexpr int kSize = 207;
}  // namespace state_layout

/// Offsets of the 339-scalar network feature form (rotations as row-major matrices).
namespace feature_layout {
inline constexpr int kR = 0;
inline constexpr int kRDot = 3;
inline constexpr int kRootRot = 6;
inline constexpr int kOmega = 15;
inline constexpr int kPoseRot = 18;
inline constexpr int kJoints = 207;
inline constexpr int kJointsDot = 273;
inline constexpr int kSize = 339;
}  // namespace feature_layout

using JointMat = Eigen::Matrix<double, kJointCount, 3, Eigen::RowMajor>;
using PoseMat = Eigen::Matrix<double, kBoneCount, 3, Eigen::RowMajor>;

struct MotionState {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d r_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi_dot = Eigen::Vector3d::Zero();  // world-frame angular velocity
  PoseMat theta = PoseMat::Zero();
  JointMat joints = JointMat::Zero();
  JointMat joints_dot = JointMat::Zero();

  bool finite() const;
  Eigen::VectorXd to_vector() const;
  static MotionState from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);

  Eigen::VectorXd to_features() const;
  static MotionState from_features(const Eigen::Ref<const Eigen::VectorXd>& f);
};

/// Rows are states in feature form.
diff::Mat states_to_features(const std::vector<MotionState>& states);

}  // namespace motionprior::kin
