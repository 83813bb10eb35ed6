#pragma once

#include "motionprior/diff/tape.hpp"

#include <Eigen/Dense>

namespace motionprior::kin {

/// Ground plane g = d * n, plane n.p + d = 0 with n the unit upward normal.
/// g = 0 stands for an already z-up frame with the floor at z = 0.
struct GroundPlane {
  Eigen::Vector3d g = Eigen::Vector3d::Zero();

  bool is_default() const { return g.norm() < 1e-9; }

  /// Splits g into (normal, offset), choosing the normal sign with normal . up_hint > 0.
  void decompose(const Eigen::Vector3d& up_hint, Eigen::Vector3d& normal, double& offset) const;
  static GroundPlane from_normal_offset(const Eigen::Vector3d& normal, double offset);
};

/// Rigid parameters (1 x 12) of the map from the observation frame to the z-up
/// ground frame: w = Q p + d e_z, Q turning the normal onto +z. When jac is
/// given it receives d(params)/d(g).
diff::Mat ground_params(const Eigen::Vector3d& g, const Eigen::Vector3d& up_hint,
                        Eigen::Matrix<double, 12, 3>* jac = nullptr);

}  // namespace motionprior::kin
