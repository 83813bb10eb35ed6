#include "motionprior/kernels/gmm.hpp"

#include "motionprior/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace motionprior::kernels {

void gmm_log_joint(const Eigen::MatrixXd& x, const Eigen::VectorXd& log_weights, const Eigen::MatrixXd& means,
                   const std::vector<Eigen::MatrixXd>& chol, Eigen::MatrixXd& out, Exec exec) {
  const Eigen::Index n = x.rows(), d = x.cols(), k = means.rows();
  require(means.cols() == d && log_weights.size() == k && static_cast<Eigen::Index>(chol.size()) == k,
          ErrorKind::DimensionMismatch, "gmm_log_joint: shapes");
  out.resize(n, k);
  const double c = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  const double ninf = -std::numeric_limits<double>::infinity();

  if (exec == Exec::Serial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index q = 0; q < k; ++q) {
        if (log_weights[q] == ninf) {
          out(i, q) = ninf;
          continue;
        }
        const Eigen::VectorXd diff = (x.row(i) - means.row(q)).transpose();
        const Eigen::VectorXd u = chol[q].triangularView<Eigen::Lower>().solve(diff);
        const double logdet = chol[q].diagonal().array().log().sum();
        out(i, q) = log_weights[q] + c - logdet - 0.5 * u.squaredNorm();
      }
    }
    return;
  }

#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index q = 0; q < k; ++q) {
    if (log_weights[q] == ninf) {
      out.col(q).setConstant(ninf);
      continue;
    }
    Eigen::MatrixXd diff = (x.rowwise() - means.row(q)).transpose();  // d x n
    chol[q].triangularView<Eigen::Lower>().solveInPlace(diff);
    const double logdet = chol[q].diagonal().array().log().sum();
    out.col(q) = (log_weights[q] + c - logdet) - 0.5 * diff.colwise().squaredNorm().transpose().array();
  }
}

}  // namespace motionprior::kernels
