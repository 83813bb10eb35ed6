#include "motionprior/kin/canonical.hpp"

#include "motionprior/kin/rotation.hpp"

#include <cmath>

namespace motionprior::kin {

Eigen::Matrix3d CanonicalTransform::rotation() const { return rot_z(yaw); }

Eigen::Vector3d CanonicalTransform::apply_point(const Eigen::Vector3d& p) const {
  return rotation() * (p + Eigen::Vector3d(shift_xy.x(), shift_xy.y(), 0.0));
}
Eigen::Vector3d CanonicalTransform::apply_vector(const Eigen::Vector3d& v) const { return rotation() * v; }
Eigen::Vector3d CanonicalTransform::invert_point(const Eigen::Vector3d& p) const {
  return rotation().transpose() * p - Eigen::Vector3d(shift_xy.x(), shift_xy.y(), 0.0);
}
Eigen::Vector3d CanonicalTransform::invert_vector(const Eigen::Vector3d& v) const {
  return rotation().transpose() * v;
}

namespace {

template <class PointFn, class VecFn>
MotionState map_state(const MotionState& s, const Eigen::Matrix3d& rot, PointFn point, VecFn vec) {
  MotionState o = s;
  o.r = point(s.r);
  o.r_dot = vec(s.r_dot);
  o.phi = rotation_log(rot * rodrigues(s.phi));
  o.phi_dot = vec(s.phi_dot);
  for (int j = 0; j < kJointCount; ++j) {
    o.joints.row(j) = point(s.joints.row(j).transpose()).transpose();
    o.joints_dot.row(j) = vec(s.joints_dot.row(j).transpose()).transpose();
  }
  return o;
}

}  // namespace

MotionState CanonicalTransform::apply(const MotionState& s) const {
  return map_state(
      s, rotation(), [this](const Eigen::Vector3d& p) { return apply_point(p); },
      [this](const Eigen::Vector3d& v) { return apply_vector(v); });
}

MotionState CanonicalTransform::invert(const MotionState& s) const {
  return map_state(
      s, rotation().transpose(), [this](const Eigen::Vector3d& p) { return invert_point(p); },
      [this](const Eigen::Vector3d& v) { return invert_vector(v); });
}

CanonicalTransform canonical_transform_of(const Eigen::Vector3d& r, const Eigen::Matrix3d& root_rot) {
  CanonicalTransform tf;
  tf.shift_xy = Eigen::Vector2d(-r.x(), -r.y());
  const double bx = root_rot(0, 0), by = root_rot(1, 0);
  const double n = std::hypot(bx, by);
  if (n < 1e-8) {
    tf.yaw = 0.0;
    tf.degenerate = true;
  } else {
    tf.yaw = std::atan2(-by / n, bx / n);
  }
  return tf;
}

std::pair<MotionState, CanonicalTransform> canonicalize(const MotionState& state) {
  const CanonicalTransform tf = canonical_transform_of(state.r, rodrigues(state.phi));
  return {tf.apply(state), tf};
}

MotionState uncanonicalize(const MotionState& state, const CanonicalTransform& tf) { return tf.invert(state); }

}  // namespace motionprior::kin
