#include "motionprior/gmm/gmm.hpp"

#include "motionprior/data/container.hpp"
#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kernels/gmm.hpp"
#include "motionprior/log.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace motionprior::gmm {

namespace fl = kin::feature_layout;

const std::vector<int>& init_feature_columns() {
  static const std::vector<int> cols = [] {
    std::vector<int> c;
    for (int i = 0; i < 3; ++i) c.push_back(fl::kRDot + i);
    for (int i = 0; i < 3; ++i) c.push_back(fl::kOmega + i);
    for (int i = 0; i < 3 * kin::kJointCount; ++i) c.push_back(fl::kJoints + i);
    for (int i = 0; i < 3 * kin::kJointCount; ++i) c.push_back(fl::kJointsDot + i);
    return c;
  }();
  return cols;
}

Eigen::VectorXd init_vector(const kin::MotionState& s) {
  const Eigen::VectorXd f = s.to_features();
  const auto& cols = init_feature_columns();
  Eigen::VectorXd v(kInitDim);
  for (int i = 0; i < kInitDim; ++i) v[i] = f[cols[i]];
  return v;
}

diff::Var init_vector_op(diff::Var features) {
  require(features.cols() == fl::kSize, ErrorKind::DimensionMismatch, "init_vector: expected 339 features");
  return diff::gather_cols(features, init_feature_columns());
}

void InitGmm::validate() const {
  const int k = components();
  require(k > 0 && means.rows() == k && static_cast<int>(chol.size()) == k, ErrorKind::DimensionMismatch,
          "gmm: component count mismatch");
  require((weights.array() >= 0.0).all() && std::abs(weights.sum() - 1.0) <= 1e-9, ErrorKind::Numeric,
          "gmm: weights must be non-negative and sum to one");
  for (const auto& l : chol) {
    require(l.rows() == dim() && l.cols() == dim(), ErrorKind::DimensionMismatch, "gmm: factor shape");
    require((l.diagonal().array() > 0.0).all() && l.allFinite(), ErrorKind::Numeric,
            "gmm: covariance factor is not positive definite");
    require(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0), ErrorKind::Format,
            "gmm: covariance factor is not lower triangular");
  }
}

InitGmm InitGmm::from_covariances(const Eigen::VectorXd& weights, const Eigen::MatrixXd& means,
                                  const std::vector<Eigen::MatrixXd>& covs) {
  InitGmm g;
  g.weights = weights;
  g.means = means;
  for (const auto& c : covs) {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    require(llt.info() == Eigen::Success, ErrorKind::Numeric, "gmm: covariance is not positive definite");
    g.chol.push_back(llt.matrixL());
  }
  g.validate();
  return g;
}

namespace {

Eigen::VectorXd log_weights_of(const Eigen::VectorXd& w) {
  return w.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); });
}

// Row-wise log-sum-exp of a matrix whose rows have at least one finite entry.
Eigen::VectorXd row_lse(const Eigen::MatrixXd& a) {
  Eigen::VectorXd out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    out[i] = m + std::log((a.row(i).array() - m).exp().sum());
  }
  return out;
}

Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& cov, int k) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::Fitting, "gmm: covariance of component " + std::to_string(k) + " lost positive definiteness");
  return llt.matrixL();
}

}  // namespace

EmResult fit_em(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const EmOptions& opts) {
  const Eigen::Index n = data.rows(), d = data.cols();
  require(k >= 1, ErrorKind::Precondition, "fit_em: need at least one component");
  require(n > k, ErrorKind::Precondition, "fit_em: need more points than components");
  require(data.allFinite(), ErrorKind::Numeric, "fit_em: data contains non-finite values");
  require(opts.reg > 0.0, ErrorKind::Precondition, "fit_em: covariance regularizer must be positive");

  std::mt19937_64 rng(seed);
  const Eigen::RowVectorXd gmean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - gmean;
  Eigen::MatrixXd gcov = centered.transpose() * centered / static_cast<double>(n);
  gcov.diagonal().array() += opts.reg;

  // k-means++ seeding
  Eigen::MatrixXd means(k, d);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  means.row(0) = data.row(first(rng));
  Eigen::VectorXd d2 = (data.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index pick = 0;
    if (d2.sum() > 0.0) {
      std::discrete_distribution<Eigen::Index> dd(d2.data(), d2.data() + n);
      pick = dd(rng);
    } else {
      pick = first(rng);
    }
    means.row(c) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - means.row(c)).rowwise().squaredNorm());
  }

  EmResult res;
  InitGmm& g = res.gmm;
  g.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  g.means = means;
  const Eigen::MatrixXd gchol = cholesky_or_throw(gcov, 0);
  g.chol.assign(k, gchol);

  Eigen::MatrixXd logp;
  double prev = -std::numeric_limits<double>::infinity();
  bool fresh = true;  // previous likelihood comparable (no reseed in between)
  for (int it = 0; it < opts.max_iters; ++it) {
    kernels::gmm_log_joint(data, log_weights_of(g.weights), g.means, g.chol, logp, opts.exec);
    const Eigen::VectorXd lse = row_lse(logp);
    const double ll = lse.sum();
    require(std::isfinite(ll), ErrorKind::Fitting, "fit_em: non-finite log-likelihood at iteration " + std::to_string(it));
    res.trace.push_back(ll);
    if (fresh && it > 0 && (ll - prev) / static_cast<double>(n) < opts.tol) {
      res.converged = true;
      break;
    }
    prev = ll;
    fresh = true;

    const Eigen::MatrixXd resp = (logp.colwise() - lse).array().exp();
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (int c = 0; c < k; ++c) {
      if (nk[c] < 1e-8) {
        // empty: restart from the worst-explained point
        if (++res.reseeds > opts.max_reseeds)
          throw Error(ErrorKind::Fitting, "fit_em: components keep collapsing after " +
                                              std::to_string(opts.max_reseeds) + " reseeds");
        Eigen::Index worst = 0;
        lse.minCoeff(&worst);
        log_warn("fit_em: component " + std::to_string(c) + " emptied at iteration " + std::to_string(it) +
                 ", reseeding");
        g.means.row(c) = data.row(worst);
        g.chol[c] = gchol;
        g.weights[c] = 1.0 / static_cast<double>(n);
        fresh = false;
        continue;
      }
      g.weights[c] = nk[c] / static_cast<double>(n);
      const Eigen::RowVectorXd mu = resp.col(c).transpose() * data / nk[c];
      Eigen::MatrixXd w = (data.rowwise() - mu).array().colwise() * resp.col(c).array().sqrt();
      Eigen::MatrixXd cov = w.transpose() * w / nk[c];
      cov.diagonal().array() += opts.reg;
      g.means.row(c) = mu;
      g.chol[c] = cholesky_or_throw(cov, c);
    }
    g.weights /= g.weights.sum();
    res.iterations = it + 1;
  }
  g.validate();
  return res;
}

namespace {

struct Eval {
  double value;
  Eigen::VectorXd grad;
};

Eval evaluate(const InitGmm& g, const Eigen::VectorXd& x, bool want_grad) {
  require(x.size() == g.dim(), ErrorKind::DimensionMismatch,
          "gmm: expected a " + std::to_string(g.dim()) + "-vector, got " + std::to_string(x.size()));
  const int k = g.components();
  const double c = -0.5 * static_cast<double>(g.dim()) * std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd lp(k);
  std::vector<Eigen::VectorXd> u(k);
  for (int q = 0; q < k; ++q) {
    if (!(g.weights[q] > 0.0)) {
      lp[q] = -std::numeric_limits<double>::infinity();
      continue;
    }
    u[q] = g.chol[q].triangularView<Eigen::Lower>().solve(x - g.means.row(q).transpose());
    lp[q] = std::log(g.weights[q]) + c - g.chol[q].diagonal().array().log().sum() - 0.5 * u[q].squaredNorm();
  }
  const double m = lp.maxCoeff();
  const double lse = m + std::log((lp.array() - m).exp().sum());
  Eval e{lse, {}};
  if (want_grad) {
    e.grad = Eigen::VectorXd::Zero(g.dim());
    for (int q = 0; q < k; ++q) {
      if (!(g.weights[q] > 0.0)) continue;
      const double r = std::exp(lp[q] - lse);
      if (r == 0.0) continue;
      e.grad -= r * g.chol[q].transpose().triangularView<Eigen::Upper>().solve(u[q]);
    }
  }
  return e;
}

}  // namespace

double log_likelihood(const InitGmm& g, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  Eval e = evaluate(g, x, grad != nullptr);
  if (grad) *grad = std::move(e.grad);
  return e.value;
}

diff::Var log_likelihood_op(const InitGmm& g, diff::Var x) {
  const diff::Mat& xv = x.value();
  diff::Mat out(xv.rows(), 1);
  diff::Mat grads(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    Eval e = evaluate(g, xv.row(i).transpose(), x.requires_grad());
    out(i, 0) = e.value;
    if (x.requires_grad()) grads.row(i) = e.grad.transpose();
  }
  return x.tape()->record(std::move(out), {x}, [x, grads](diff::Tape& t, const diff::Mat& gout) {
    t.accumulate(x, (grads.array().colwise() * gout.col(0).array()).matrix());
  });
}

Eigen::VectorXd sample(const InitGmm& g, std::mt19937_64& rng) {
  std::discrete_distribution<int> pick(g.weights.data(), g.weights.data() + g.weights.size());
  const int q = pick(rng);
  std::normal_distribution<double> n01;
  Eigen::VectorXd eps(g.dim());
  for (int i = 0; i < g.dim(); ++i) eps[i] = n01(rng);
  return g.means.row(q).transpose() + g.chol[q] * eps;
}

void save_gmm(const InitGmm& g, const std::string& path, const std::string& skeleton_hash) {
  g.validate();
  data::Container c;
  c.magic = kGmmMagic;
  c.version = kGmmVersion;
  c.type = data::PayloadType::Float64;
  c.meta = {{"components", g.components()}, {"dim", g.dim()}, {"skeleton_hash", skeleton_hash},
            {"layout", "weights, means (row-major), lower cholesky factors (row-major)"}};
  const int k = g.components(), d = g.dim();
  c.f64.reserve(static_cast<std::size_t>(k) * (1 + d + d * d));
  for (int q = 0; q < k; ++q) c.f64.push_back(g.weights[q]);
  for (int q = 0; q < k; ++q)
    for (int i = 0; i < d; ++i) c.f64.push_back(g.means(q, i));
  for (int q = 0; q < k; ++q)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) c.f64.push_back(g.chol[q](i, j));
  data::write_container(path, c);
}

InitGmm load_gmm(const std::string& path, std::string* skeleton_hash) {
  const data::Container c = data::read_container(path, kGmmMagic, kGmmVersion);
  require(c.type == data::PayloadType::Float64, ErrorKind::Format, path + ": mixture payload must be float64");
  int k = 0, d = 0;
  try {
    k = c.meta.at("components").get<int>();
    d = c.meta.at("dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": " + e.what());
  }
  require(k > 0 && d > 0, ErrorKind::Format, path + ": bad mixture shape");
  require(c.f64.size() == static_cast<std::size_t>(k) * (1 + d + static_cast<std::size_t>(d) * d),
          ErrorKind::LengthMismatch, path + ": mixture payload length");
  InitGmm g;
  g.weights.resize(k);
  g.means.resize(k, d);
  std::size_t p = 0;
  for (int q = 0; q < k; ++q) g.weights[q] = c.f64[p++];
  for (int q = 0; q < k; ++q)
    for (int i = 0; i < d; ++i) g.means(q, i) = c.f64[p++];
  for (int q = 0; q < k; ++q) {
    Eigen::MatrixXd l(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) l(i, j) = c.f64[p++];
    g.chol.push_back(std::move(l));
  }
  g.validate();
  if (skeleton_hash) *skeleton_hash = c.meta.value("skeleton_hash", "");
  return g;
}

}  // namespace motionprior::gmm
