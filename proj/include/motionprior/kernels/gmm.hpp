#pragma once

#include "motionprior/kernels/exec.hpp"

#include <Eigen/Dense>

#include <vector>

namespace motionprior::kernels {

/// out(n, k) = log w_k + log N(x_n; mu_k, L_k L_k^T) for rows x_n of x.
/// Components with zero weight give -inf. means is K x D, chol holds K lower factors.
void gmm_log_joint(const Eigen::MatrixXd& x, const Eigen::VectorXd& log_weights, const Eigen::MatrixXd& means,
                   const std::vector<Eigen::MatrixXd>& chol, Eigen::MatrixXd& out, Exec exec);

}  // namespace motionprior::kernels
