#pragma once

#include "motionprior/diff/tape.hpp"
#include "motionprior/kernels/exec.hpp"
#include "motionprior/kin/state.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace motionprior::gmm {

/// r_dot, phi_dot, joints, joints_dot.
inline constexpr int kInitDim = 3 + 3 + 2 * 3 * kin::kJointCount;  // 138

/// Initial-state vector of a (canonical) state.
Eigen::VectorXd init_vector(const kin::MotionState& s);
/// Same from feature rows: B x 339 -> B x 138.
diff::Var init_vector_op(diff::Var features);
const std::vector<int>& init_feature_columns();

struct InitGmm {
  Eigen::VectorXd weights;             // K
  Eigen::MatrixXd means;               // K x D
  std::vector<Eigen::MatrixXd> chol;   // lower Cholesky factors of the covariances

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
  Eigen::MatrixXd covariance(int k) const { return chol[k] * chol[k].transpose(); }
  /// Weights sum to one, factors lower triangular with positive diagonals.
  void validate() const;

  /// Builds factors from covariances; throws a numeric error when one is not PD.
  static InitGmm from_covariances(const Eigen::VectorXd& weights, const Eigen::MatrixXd& means,
                                  const std::vector<Eigen::MatrixXd>& covs);
};

struct EmOptions {
  int max_iters = 200;
  double reg = 1e-6;
  double tol = 1e-7;  // per-point log-likelihood improvement
  int max_reseeds = 20;
  kernels::Exec exec = kernels::Exec::Parallel;
};

struct EmResult {
  InitGmm gmm;
  std::vector<double> trace;  // total log-likelihood before each M-step
  int iterations = 0;
  int reseeds = 0;
  bool converged = false;
};

/// EM with k-means++ seeding. Rows of data are points.
EmResult fit_em(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const EmOptions& opts = {});

/// log sum_k w_k N(x; mu_k, Sigma_k); grad (optional) receives d/dx.
double log_likelihood(const InitGmm& g, const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr);
/// Row-wise log-likelihood on a tape: B x D -> B x 1.
diff::Var log_likelihood_op(const InitGmm& g, diff::Var x);

Eigen::VectorXd sample(const InitGmm& g, std::mt19937_64& rng);

inline constexpr char kGmmMagic[] = "MPGMM";
inline constexpr std::uint32_t kGmmVersion = 1;

void save_gmm(const InitGmm& g, const std::string& path, const std::string& skeleton_hash = "");
InitGmm load_gmm(const std::string& path, std::string* skeleton_hash = nullptr);

}  // namespace motionprior::gmm
