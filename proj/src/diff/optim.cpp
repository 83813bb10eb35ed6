#include "motionprior/diff/optim.hpp"

#include "motionprior/error.hpp"

#include <cmath>
#include <deque>

namespace motionprior::diff {

GradCheckResult grad_check(const DiffFunction& f, const Vec& x, double eps,
                           std::span<const Eigen::Index> coords) {
  Vec g;
  const double f0 = f(x, &g);
  require(std::isfinite(f0), ErrorKind::Numeric, "grad_check: non-finite value at x");
  require(g.size() == x.size(), ErrorKind::DimensionMismatch, "grad_check: gradient length");

  std::vector<Eigen::Index> all;
  if (coords.empty()) {
    all.resize(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    coords = all;
  }

  GradCheckResult res;
  Vec xp = x;
  for (Eigen::Index i : coords) {
    const double orig = xp[i];
    xp[i] = orig + eps;
    const double fp = f(xp, nullptr);
    xp[i] = orig - eps;
    const double fm = f(xp, nullptr);
    xp[i] = orig;
    require(std::isfinite(fp) && std::isfinite(fm), ErrorKind::Numeric,
            "grad_check: non-finite value near x");
    const double num = (fp - fm) / (2.0 * eps);
    const double ana = g[i];
    const double err =
        std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
    if (err > res.max_rel_error || res.worst_index < 0) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = ana;
      res.numeric = num;
    }
  }
  return res;
}

namespace {

struct CurvaturePair {
  Vec s;
  Vec y;
  double rho;
};

Vec two_loop_direction(const Vec& g, const std::deque<CurvaturePair>& hist) {
  Vec q = g;
  std::vector<double> alpha(hist.size());
  for (std::size_t k = hist.size(); k-- > 0;) {
    alpha[k] = hist[k].rho * hist[k].s.dot(q);
    q -= alpha[k] * hist[k].y;
  }
  const CurvaturePair& last = hist.back();
  const double gamma = last.s.dot(last.y) / last.y.squaredNorm();
  Vec r = gamma * q;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const double beta = hist[k].rho * hist[k].y.dot(r);
    r += hist[k].s * (alpha[k] - beta);
  }
  return -r;
}

Vec steepest_direction(const Vec& g) {
  const double l1 = g.lpNorm<1>();
  return -g * std::min(1.0, l1 > 0.0 ? 1.0 / l1 : 1.0);
}

}  // namespace

LbfgsResult lbfgs_minimize(const DiffFunction& f, const Vec& x0, const LbfgsOptions& opts) {
  require(opts.max_iters >= 1, ErrorKind::Precondition, "lbfgs: max_iters must be >= 1");
  require(opts.history >= 1, ErrorKind::Precondition, "lbfgs: history must be >= 1");

  LbfgsResult res;
  Vec x = x0;
  Vec g;
  double fx = f(x, &g);
  res.evaluations = 1;
  require(std::isfinite(fx), ErrorKind::Numeric, "lbfgs: non-finite objective at x0");
  require(g.allFinite(), ErrorKind::Numeric, "lbfgs: non-finite gradient at x0");
  res.trace.push_back(fx);

  std::deque<CurvaturePair> hist;
  Vec gn;
  for (int it = 0; it < opts.max_iters; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    Vec d = hist.empty() ? steepest_direction(g) : two_loop_direction(g, hist);
    if (!(g.dot(d) < 0.0) || !d.allFinite()) {
      hist.clear();
      d = steepest_direction(g);
    }

    double t = opts.step;
    bool accepted = false;
    Vec xn;
    double fn = 0.0;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      xn = x + t * d;
      fn = f(xn, &gn);
      ++res.evaluations;
      if (std::isfinite(fn) && gn.allFinite() && fn < fx) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }

    Vec s = xn - x;
    Vec y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-10) {
      hist.push_back(CurvaturePair{std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(hist.size()) > opts.history) hist.pop_front();
    }
    x = std::move(xn);
    fx = fn;
    g = gn;
    ++res.iterations;
    res.trace.push_back(fx);
  }
  res.x = std::move(x);
  res.f = fx;
  return res;
}

void adamax_step(Vec& params, const Vec& grads, AdamaxState& state, const AdamaxOptions& opts) {
  require(params.size() == grads.size(), ErrorKind::DimensionMismatch,
          "adamax: parameter/gradient length mismatch");
  if (state.m.size() == 0) {
    state.m = Vec::Zero(params.size());
    state.u = Vec::Zero(params.size());
  }
  require(state.m.size() == params.size() && state.u.size() == params.size(),
          ErrorKind::DimensionMismatch, "adamax: state length mismatch");
  ++state.step;
  state.m = opts.beta1 * state.m + (1.0 - opts.beta1) * grads;
  state.u = (opts.beta2 * state.u).cwiseMax(grads.cwiseAbs());
  const double step = opts.lr / (1.0 - std::pow(opts.beta1, static_cast<double>(state.step)));
  params.array() -= step * state.m.array() / (state.u.array() + opts.eps);
}

}  // namespace motionprior::diff
