#include "motionprior/diff/ops.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/error.hpp"
#include "motionprior/gmm/gmm.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>

using namespace motionprior;
using namespace motionprior::gmm;

namespace {

Eigen::MatrixXd blobs(std::mt19937_64& rng, const std::vector<Eigen::VectorXd>& centers, int per, double sd) {
  const int d = static_cast<int>(centers[0].size());
  Eigen::MatrixXd x(per * static_cast<int>(centers.size()), d);
  std::normal_distribution<double> nd(0.0, sd);
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int i = 0; i < per; ++i)
      for (int j = 0; j < d; ++j) x(c * per + i, j) = centers[c][j] + nd(rng);
  return x;
}

InitGmm random_gmm(std::mt19937_64& rng, int k, int d) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) w[i] = 0.5 + std::abs(nd(rng));
  w /= w.sum();
  Eigen::MatrixXd mu(k, d);
  std::vector<Eigen::MatrixXd> covs;
  for (int q = 0; q < k; ++q) {
    for (int i = 0; i < d; ++i) mu(q, i) = nd(rng);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d * d; ++i) a.data()[i] = 0.3 * nd(rng);
    covs.push_back(a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(d, d));
  }
  return InitGmm::from_covariances(w, mu, covs);
}

}  // namespace

TEST_CASE("single component EM gives the sample mean and covariance") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = blobs(rng, {Eigen::VectorXd::Constant(5, 2.0)}, 400, 0.7);
  const auto res = fit_em(x, 1, 3);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  Eigen::MatrixXd cov = c.transpose() * c / double(x.rows());
  cov.diagonal().array() += 1e-6;
  CHECK((res.gmm.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((res.gmm.covariance(0) - cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(res.gmm.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("two separated blobs are recovered") {
  std::mt19937_64 rng(2);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(4), b = Eigen::VectorXd::Constant(4, 5.0);
  const Eigen::MatrixXd x = blobs(rng, {a, b}, 500, 0.3);
  const auto res = fit_em(x, 2, 7);
  const int ia = (res.gmm.means.row(0).transpose() - a).norm() < (res.gmm.means.row(1).transpose() - a).norm() ? 0 : 1;
  CHECK((res.gmm.means.row(ia).transpose() - a).cwiseAbs().maxCoeff() < 0.05);
  CHECK((res.gmm.means.row(1 - ia).transpose() - b).cwiseAbs().maxCoeff() < 0.05);
  CHECK(res.gmm.weights[0] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("EM log-likelihood never decreases") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < 4; ++c) {
      Eigen::VectorXd v(6);
      for (int j = 0; j < 6; ++j) v[j] = nd(rng);
      centers.push_back(v);
    }
    const Eigen::MatrixXd x = blobs(rng, centers, 150, 0.8);
    const auto res = fit_em(x, 5, seed);
    CAPTURE(seed);
    REQUIRE(res.trace.size() >= 2);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      CHECK(res.trace[i] >= res.trace[i - 1] - 1e-9 * std::max(1.0, std::abs(res.trace[i - 1])));
  }
}

TEST_CASE("EM preconditions") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 2);
  CHECK_THROWS_AS(fit_em(x, 3, 0), Error);
  CHECK_THROWS_AS(fit_em(x, 0, 0), Error);
  x(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit_em(x, 1, 0), Error);
}

TEST_CASE("duplicate points force a reseed and EM still finishes") {
  // 10 distinct points repeated; more components than distinct locations
  std::mt19937_64 rng(4);
  Eigen::MatrixXd base = Eigen::MatrixXd::Random(3, 2) * 5.0;
  Eigen::MatrixXd x(300, 2);
  for (int i = 0; i < 300; ++i) x.row(i) = base.row(i % 3);
  EmOptions o;
  o.max_iters = 30;
  EmResult r;
  try {
    r = fit_em(x, 5, 1, o);
    CHECK(r.gmm.weights.sum() == doctest::Approx(1.0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Fitting);
  }
}

TEST_CASE("log-likelihood closed form values") {
  const int d = kInitDim;
  const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(d, -1.0, 1.0);
  const InitGmm g = InitGmm::from_covariances(Eigen::VectorXd::Ones(1), mu.transpose(), {Eigen::MatrixXd::Identity(d, d)});
  CHECK(log_likelihood(g, mu) == doctest::Approx(-0.5 * d * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));

  Eigen::MatrixXd means(2, d);
  means.row(0) = mu.transpose();
  means.row(1) = -mu.transpose();
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  const InitGmm g2 =
      InitGmm::from_covariances(w, means, {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)});
  const Eigen::VectorXd x = -mu;
  CHECK(log_likelihood(g2, x) == log_likelihood(g, x));
}

TEST_CASE("log-likelihood stays finite far from every component") {
  std::mt19937_64 rng(5);
  const InitGmm g = random_gmm(rng, 3, 4);
  const double v = log_likelihood(g, Eigen::VectorXd::Constant(4, 1e6));
  CHECK(std::isfinite(v));
}

TEST_CASE("log-likelihood gradient") {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const InitGmm g = random_gmm(rng, 3, 6);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = std::normal_distribution<double>()(rng);
    auto f = [&](const diff::Vec& v, diff::Vec* gr) { return log_likelihood(g, v, gr); };
    worst = std::max(worst, diff::grad_check(f, x).max_rel_error);
  }
  CHECK(worst < 1e-5);

  // tape op, batched
  const InitGmm g = random_gmm(rng, 2, 5);
  const diff::Mat w = diff::Mat::Random(3, 1);
  auto fb = [&](const diff::Vec& v, diff::Vec* gr) {
    diff::Tape t;
    diff::Var x = t.variable(Eigen::Map<const diff::Mat>(v.data(), 3, 5));
    diff::Var e = diff::sum(diff::mul(log_likelihood_op(g, x), t.constant(w)));
    if (gr) {
      t.backward(e);
      diff::Mat gm = t.grad(x);
      *gr = Eigen::Map<const diff::Vec>(gm.data(), gm.size());
    }
    return e.value()(0, 0);
  };
  CHECK(diff::grad_check(fb, diff::Vec::Random(15)).max_rel_error < 1e-6);
}

TEST_CASE("sampling") {
  std::mt19937_64 rng(7);
  const InitGmm g = random_gmm(rng, 3, 4);
  std::mt19937_64 a(11), b(11);
  CHECK(sample(g, a) == sample(g, b));

  const InitGmm g1 = random_gmm(rng, 1, 4);
  const int n = 100000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < n; ++i) acc += sample(g1, rng);
  acc /= n;
  const Eigen::VectorXd sd = g1.covariance(0).diagonal().cwiseSqrt();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(acc[i] - g1.means(0, i)) < 3.0 * sd[i] / std::sqrt(double(n)));

  const InitGmm tight =
      InitGmm::from_covariances(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(1, 4), {1e-6 * Eigen::MatrixXd::Identity(4, 4)});
  for (int i = 0; i < 100; ++i) CHECK((sample(tight, rng) - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("mixture file round trip") {
  std::mt19937_64 rng(8);
  const InitGmm g = random_gmm(rng, 4, 7);
  const auto path = (std::filesystem::temp_directory_path() / "mp_test.gmm").string();
  save_gmm(g, path, "hh");
  std::string h;
  const InitGmm l = load_gmm(path, &h);
  CHECK(h == "hh");
  CHECK(l.weights == g.weights);
  CHECK(l.means == g.means);
  for (int q = 0; q < 4; ++q) CHECK(l.chol[q] == g.chol[q]);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_gmm(path), Error);
}

TEST_CASE("non positive definite covariance is rejected") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(3, 3);
  c(2, 2) = -1.0;
  CHECK_THROWS_AS(InitGmm::from_covariances(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 3), {c}), Error);
}

TEST_CASE("init vector picks velocities and joints") {
  kin::MotionState s;
  s.r_dot = Eigen::Vector3d(1, 2, 3);
  s.phi_dot = Eigen::Vector3d(4, 5, 6);
  s.joints.setConstant(7.0);
  s.joints_dot.setConstant(8.0);
  s.r = Eigen::Vector3d(9, 9, 9);
  const Eigen::VectorXd v = init_vector(s);
  REQUIRE(v.size() == 138);
  CHECK(v.head(6) == (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
  CHECK(v.segment(6, 66).isConstant(7.0));
  CHECK(v.tail(66).isConstant(8.0));
}
