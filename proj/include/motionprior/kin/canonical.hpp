#pragma once

#include "motionprior/kin/state.hpp"

#include <utility>

namespace motionprior::kin {

/// x' = Rz(yaw) (x + shift), with shift = (shift_xy, 0).
struct CanonicalTransform {
  double yaw = 0.0;
  Eigen::Vector2d shift_xy = Eigen::Vector2d::Zero();
  bool degenerate = false;

  Eigen::Matrix3d rotation() const;
  Eigen::Vector3d apply_point(const Eigen::Vector3d& p) const;
  Eigen::Vector3d apply_vector(const Eigen::Vector3d& v) const;
  Eigen::Vector3d invert_point(const Eigen::Vector3d& p) const;
  Eigen::Vector3d invert_vector(const Eigen::Vector3d& v) const;

  MotionState apply(const MotionState& s) const;
  MotionState invert(const MotionState& s) const;
};

/// Transform that puts the root at the origin (in xy) with the root's +x axis on +x.
CanonicalTransform canonical_transform_of(const Eigen::Vector3d& r, const Eigen::Matrix3d& root_rot);

std::pair<MotionState, CanonicalTransform> canonicalize(const MotionState& state);
MotionState uncanonicalize(const MotionState& state, const CanonicalTransform& tf);

}  // namespace motionprior::kin
