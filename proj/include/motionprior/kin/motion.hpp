#pragma once

#include "motionprior/kin/state.hpp"

#include <vector>

namespace motionprior::kin {

inline constexpr double kDefaultFrameTime = 1.0 / 30.0;

/// Backward differences v_t = (p_t - p_{t-1}) / h with v_0 = v_1. Rows are frames.
/// A single frame yields zeros and a warning.
Eigen::MatrixXd finite_difference_velocities(const Eigen::MatrixXd& positions, double h = kDefaultFrameTime);

/// World-frame angular velocity log(R_t R_{t-1}^T) / h, first frame copies the second.
Eigen::MatrixXd angular_velocities(const std::vector<Eigen::Matrix3d>& rotations, double h = kDefaultFrameTime);

/// Recomputes r_dot, phi_dot and joints_dot of a sequence from its positions.
void fill_velocities(std::vector<MotionState>& states, double h = kDefaultFrameTime);

struct ContactThresholds {
  double max_step = 0.005;       // displacement since the previous frame (m)
  double max_height = 0.08;      // heels, knees, hands (m)
  double max_toe_height = 0.04;  // toes (m)
};

/// Per-frame 0/1 flags for the skeleton's 8 contact joints (T x 8). The first
/// frame copies the second. Joint positions are on a z = 0 floor.
Eigen::MatrixXd annotate_contacts(const std::vector<JointMat>& joints, const Skeleton& skel,
                                  const ContactThresholds& th = {});

}  // namespace motionprior::kin
