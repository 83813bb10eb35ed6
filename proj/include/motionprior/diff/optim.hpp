#pragma once

#include "motionprior/diff/tape.hpp"

#include <functional>
#include <span>
#include <vector>

namespace motionprior::diff {

/// Scalar objective with exact gradient. When `grad` is non-null it is resized
/// to x.size() and filled. Must be deterministic and reentrant.
using DiffFunction = std::function<double(const Vec& x, Vec* grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference check. Relative error per coordinate is
/// |g_a - g_n| / max(1, |g_a|, |g_n|). An empty `coords` checks every coordinate.
GradCheckResult grad_check(const DiffFunction& f, const Vec& x, double eps = 1e-5,
                           std::span<const Eigen::Index> coords = {});

struct LbfgsOptions {
  int max_iters = 100;
  double step = 1.0;
  int history = 10;
  int max_halvings = 20;
  double grad_tol = 1e-7;
};

struct LbfgsResult {
  Vec x;
  double f = 0.0;
  std::vector<double> trace;  // trace[0] = f(x0), then best value after each iteration
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;  // gradient tolerance reached
  bool stalled = false;    // halving budget exhausted without decrease
};

/// Limited-memory BFGS (two-loop recursion) with a fixed unit step that is
/// halved until the objective decreases. Returns the best iterate seen.
LbfgsResult lbfgs_minimize(const DiffFunction& f, const Vec& x0, const LbfgsOptions& opts);

struct AdamaxOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamaxState {
  Vec m;  // first moment
  Vec u;  // exponentially weighted infinity norm
  long step = 0;
};

/// One Adamax update:
///   m <- b1 m + (1-b1) g,  u <- max(b2 u, |g|),  p <- p - lr/(1-b1^t) * m/(u+eps)
void adamax_step(Vec& params, const Vec& grads, AdamaxState& state, const AdamaxOptions& opts);

}  // namespace motionprior::diff
