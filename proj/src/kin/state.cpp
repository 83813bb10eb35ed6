#include "motionprior/kin/state.hpp"

#include "motionprior/error.hpp"
#include "motionprior/kin/rotation.hpp"

namespace motionprior::kin {

namespace sl = state_layout;
namespace fl = feature_layout;

bool MotionState::finite() const {
  return r.allFinite() && r_dot.allFinite() && phi.allFinite() && phi_dot.allFinite() &&
         theta.allFinite() && joints.allFinite() && joints_dot.allFinite();
}

Eigen::VectorXd MotionState::to_vector() const {
  Eigen::VectorXd v(sl::kSize);
  v.segment<3>(sl::kR) = r;
  v.segment<3>(sl::kRDot) = r_dot;
  v.segment<3>(sl::kPhi) = phi;
  v.segment<3>(sl::kPhiDot) = phi_dot;
  v.segment<63>(sl::kTheta) = Eigen::Map<const Eigen::Matrix<double, 63, 1>>(theta.data());
  v.segment<66>(sl::kJoints) = Eigen::Map<const Eigen::Matrix<double, 66, 1>>(joints.data());
  v.segment<66>(sl::kJointsDot) = Eigen::Map<const Eigen::Matrix<double, 66, 1>>(joints_dot.data());
  return v;
}

MotionState MotionState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  require(v.size() == sl::kSize, ErrorKind::DimensionMismatch, "state vector must have 207 entries");
  MotionState s;
  s.r = v.segment<3>(sl::kR);
  s.r_dot = v.segment<3>(sl::kRDot);
  s.phi = v.segment<3>(sl::kPhi);
  s.phi_dot = v.segment<3>(sl::kPhiDot);
  Eigen::Map<Eigen::Matrix<double, 63, 1>>(s.theta.data()) = v.segment<63>(sl::kTheta);
  Eigen::Map<Eigen::Matrix<double, 66, 1>>(s.joints.data()) = v.segment<66>(sl::kJoints);
  Eigen::Map<Eigen::Matrix<double, 66, 1>>(s.joints_dot.data()) = v.segment<66>(sl::kJointsDot);
  return s;
}

namespace {

void put_rot(Eigen::VectorXd& f, int off, const Eigen::Matrix3d& m) {
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) f[off + 3 * a + b] = m(a, b);
}

Eigen::Matrix3d get_rot(const Eigen::Ref<const Eigen::VectorXd>& f, int off) {
  Eigen::Matrix3d m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = f[off + 3 * a + b];
  return m;
}

}  // namespace

Eigen::VectorXd MotionState::to_features() const {
  Eigen::VectorXd f(fl::kSize);
  f.segment<3>(fl::kR) = r;
  f.segment<3>(fl::kRDot) = r_dot;
  put_rot(f, fl::kRootRot, rodrigues(phi));
  f.segment<3>(fl::kOmega) = phi_dot;
  for (int k = 0; k < kBoneCount; ++k)
    put_rot(f, fl::kPoseRot + 9 * k, rodrigues(Eigen::Vector3d(theta.row(k).transpose())));
  f.segment<66>(fl::kJoints) = Eigen::Map<const Eigen::Matrix<double, 66, 1>>(joints.data());
  f.segment<66>(fl::kJointsDot) = Eigen::Map<const Eigen::Matrix<double, 66, 1>>(joints_dot.data());
  return f;
}

MotionState MotionState::from_features(const Eigen::Ref<const Eigen::VectorXd>& f) {
  require(f.size() == fl::kSize, ErrorKind::DimensionMismatch, "feature vector must have 339 entries");
  MotionState s;
  s.r = f.segment<3>(fl::kR);
  s.r_dot = f.segment<3>(fl::kRDot);
  s.phi = rotation_log(orthonormalize(get_rot(f, fl::kRootRot)));
  s.phi_dot = f.segment<3>(fl::kOmega);
  for (int k = 0; k < kBoneCount; ++k)
    s.theta.row(k) = rotation_log(orthonormalize(get_rot(f, fl::kPoseRot + 9 * k))).transpose();
  Eigen::Map<Eigen::Matrix<double, 66, 1>>(s.joints.data()) = f.segment<66>(fl::kJoints);
  Eigen::Map<Eigen::Matrix<double, 66, 1>>(s.joints_dot.data()) = f.segment<66>(fl::kJointsDot);
  return s;
}

diff::Mat states_to_features(const std::vector<MotionState>& states) {
  diff::Mat m(static_cast<Eigen::Index>(states.size()), fl::kSize);
  for (std::size_t i = 0; i < states.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = states[i].to_features().transpose();
  return m;
}

}  // namespace motionprior::kin
