#include "motionprior/train/losses.hpp"

#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kin/geom_ops.hpp"

namespace motionprior::train {

namespace fl = kin::feature_layout;

double kl_diag_gaussians(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& ls_q, const Eigen::VectorXd& mu_p,
                         const Eigen::VectorXd& ls_p) {
  require(mu_q.size() == ls_q.size() && mu_q.size() == mu_p.size() && mu_q.size() == ls_p.size(),
          ErrorKind::DimensionMismatch, "kl: dimension mismatch");
  const Eigen::ArrayXd var_ratio = (2.0 * (ls_q - ls_p)).array().exp();
  const Eigen::ArrayXd d2 = (mu_q - mu_p).array().square() * (-2.0 * ls_p).array().exp();
  return (ls_p - ls_q).sum() + 0.5 * (var_ratio + d2 - 1.0).sum();
}

Var kl_diag_op(const model::GaussianVars& q, const model::GaussianVars& p) {
  require(q.mu.rows() == p.mu.rows() && q.mu.cols() == p.mu.cols(), ErrorKind::DimensionMismatch,
          "kl: dimension mismatch");
  using namespace diff;
  Var inv_var_p = exp(scale(p.log_sigma, -2.0));
  Var var_ratio = exp(scale(sub(q.log_sigma, p.log_sigma), 2.0));
  Var d2 = mul(square(sub(q.mu, p.mu)), inv_var_p);
  Var per = add(sub(p.log_sigma, q.log_sigma), scale(add_scalar(add(var_ratio, d2), -1.0), 0.5));
  return mean(per);
}

double reconstruction_loss(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat) {
  require(x_true.size() == x_hat.size(), ErrorKind::DimensionMismatch, "reconstruction: length mismatch");
  return (x_true - x_hat).squaredNorm() / static_cast<double>(x_true.size());
}

Var reconstruction_loss_op(Var x_hat, const Mat& x_true) {
  require(x_hat.rows() == x_true.rows() && x_hat.cols() == x_true.cols(), ErrorKind::DimensionMismatch,
          "reconstruction: shape mismatch");
  const double n = static_cast<double>(x_true.size());
  return diff::scale(diff::weighted_sq_error(x_hat, x_true, Mat::Ones(x_true.rows(), x_true.cols())), 1.0 / n);
}

RegularizerVars regularizer_losses(const kin::Skeleton& skel, Var pred, Var logits, const Mat& truth,
                                   const Mat& contacts, const Mat& beta) {
  const Eigen::Index b = truth.rows();
  require(pred.cols() == fl::kSize && truth.cols() == fl::kSize && pred.rows() == b, ErrorKind::DimensionMismatch,
          "regularizers: feature shapes");
  require(logits.rows() == b && logits.cols() == kin::kContactCount && contacts.rows() == b &&
              contacts.cols() == kin::kContactCount,
          ErrorKind::DimensionMismatch, "regularizers: contact shapes");
  require(beta.rows() == b && beta.cols() == kin::kShapeDim, ErrorKind::DimensionMismatch, "regularizers: shape rows");
  diff::Tape& tape = *pred.tape();
  using diff::slice_cols;

  // FK of the truth
  Mat tj, tm, tg;
  kernels::fk_forward(skel, truth.middleCols(fl::kR, 3), truth.middleCols(fl::kRootRot, 9),
                      truth.middleCols(fl::kPoseRot, 9 * kin::kBoneCount), beta, tj, tm, tg, kernels::Exec::Parallel);

  Var beta_c = tape.constant(beta);
  kin::FkVars fk = kin::fk_op(skel, slice_cols(pred, fl::kR, 3), slice_cols(pred, fl::kRootRot, 9),
                              slice_cols(pred, fl::kPoseRot, 9 * kin::kBoneCount), beta_c);
  const Eigen::Index nj = 3 * kin::kJointCount;
  auto mse = [&](Var a, const Mat& target) {
    return diff::scale(diff::weighted_sq_error(a, target, Mat::Ones(target.rows(), target.cols())),
                       1.0 / static_cast<double>(target.size()));
  };
  RegularizerVars r;
  r.joint = mse(fk.joints, tj);
  Var regressed = slice_cols(pred, fl::kJoints, nj);
  r.consist = diff::scale(diff::sum(diff::square(diff::sub(regressed, fk.joints))), 1.0 / static_cast<double>(b * nj));
  r.marker = mse(fk.markers, tm);
  r.bce = diff::bce_with_logits(logits, contacts);

  std::vector<int> cols;
  for (int j : skel.contact_joints)
    for (int a = 0; a < 3; ++a) cols.push_back(fl::kJointsDot + 3 * j + a);
  Var v = diff::gather_cols(pred, cols);  // B x 24
  std::vector<Var> speeds;
  for (int c = 0; c < kin::kContactCount; ++c) speeds.push_back(diff::sum_cols(diff::square(slice_cols(v, 3 * c, 3))));
  Var sp = diff::concat_cols(speeds);  // B x 8
  r.vel = diff::scale(diff::sum(diff::mul(diff::sigmoid(logits), sp)), 1.0 / static_cast<double>(b));
  return r;
}

}  // namespace motionprior::train
