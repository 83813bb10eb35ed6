#pragma once

#include "motionprior/model/cvae.hpp"

namespace motionprior::train {

using diff::Mat;
using diff::Var;

/// Closed-form KL(q || p) between diagonal Gaussians, summed over dimensions.
double kl_diag_gaussians(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& log_sigma_q, const Eigen::VectorXd& mu_p,
                         const Eigen::VectorXd& log_sigma_p);
/// Same on a tape, averaged over dimensions and batch rows (1 x 1).
Var kl_diag_op(const model::GaussianVars& q, const model::GaussianVars& p);

/// Mean squared error over the 207 state scalars and the batch.
double reconstruction_loss(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat);
Var reconstruction_loss_op(Var x_hat, const Mat& x_true);

struct RegularizerVars {
  Var joint;    // FK of predicted parameters vs FK of the truth
  Var consist;  // regressed joints vs FK of predicted parameters
  Var marker;   // virtual markers
  Var bce;      // contact classification
  Var vel;      // contact-weighted joint speed
};

/// Regularizers for predicted canonical features `pred` (B x 339) and contact
/// logits (B x 8) against true canonical features, 0/1 contact labels and
/// per-row shapes (B x 16). Squared terms average over features and batch;
/// vel sums over the contact joints and averages over the batch.
RegularizerVars regularizer_losses(const kin::Skeleton& skel, Var pred, Var logits, const Mat& truth,
                                   const Mat& contacts, const Mat& beta);

}  // namespace motionprior::train
