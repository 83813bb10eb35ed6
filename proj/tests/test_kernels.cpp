#include "motionprior/kernels/chamfer.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kernels/gmm.hpp"
#include "motionprior/kin/skeleton.hpp"

#include <doctest.h>

#include <random>

using namespace motionprior;
using namespace motionprior::kernels;

TEST_CASE("parallel gmm kernel matches the serial reference") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  const int n = 257, d = 9, k = 5;
  Eigen::MatrixXd x(n, d), mu(k, d);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  for (int i = 0; i < mu.size(); ++i) mu.data()[i] = nd(rng);
  std::vector<Eigen::MatrixXd> chol;
  for (int q = 0; q < k; ++q) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    Eigen::MatrixXd c = a * a.transpose() + Eigen::MatrixXd::Identity(d, d);
    chol.push_back(Eigen::LLT<Eigen::MatrixXd>(c).matrixL());
  }
  Eigen::VectorXd lw = Eigen::VectorXd::Constant(k, std::log(1.0 / k));
  lw[3] = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd a, b;
  gmm_log_joint(x, lw, mu, chol, a, Exec::Serial);
  gmm_log_joint(x, lw, mu, chol, b, Exec::Parallel);
  CHECK(a.col(3).maxCoeff() == -std::numeric_limits<double>::infinity());
  CHECK(b.col(3).maxCoeff() == -std::numeric_limits<double>::infinity());
  a.col(3).setZero();
  b.col(3).setZero();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("parallel nearest neighbours match the serial reference") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points q(500, 3), p(65, 3);
  for (int i = 0; i < q.size(); ++i) q.data()[i] = u(rng);
  for (int i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  p.row(10) = p.row(3);  // tie resolves to the lower index
  q.row(0) = p.row(3);
  std::vector<int> ia, ib;
  Eigen::VectorXd da, db;
  nearest_points(q, p, ia, da, Exec::Serial);
  nearest_points(q, p, ib, db, Exec::Parallel);
  CHECK(ia == ib);
  CHECK(da == db);
  CHECK(ia[0] == 3);
  CHECK(da[0] == 0.0);
  for (int i = 0; i < 500; ++i) CHECK(da[i] <= (p.rowwise() - q.row(i)).rowwise().squaredNorm().minCoeff() + 1e-15);
}

TEST_CASE("parallel fk matches the serial reference") {
  const auto& skel = kin::Skeleton::default_humanoid();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const int b = 17;
  Mat r(b, 3), root(b, 9), pose(b, 9 * 21), beta(b, 16);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = nd(rng);
  for (int i = 0; i < root.size(); ++i) root.data()[i] = nd(rng);
  for (int i = 0; i < pose.size(); ++i) pose.data()[i] = nd(rng);
  for (int i = 0; i < beta.size(); ++i) beta.data()[i] = 0.3 * nd(rng);
  Mat j1, m1, g1, j2, m2, g2;
  fk_forward(skel, r, root, pose, beta, j1, m1, g1, Exec::Serial);
  fk_forward(skel, r, root, pose, beta, j2, m2, g2, Exec::Parallel);
  CHECK(j1 == j2);
  CHECK(m1 == m2);
  Mat gj = Mat::Random(b, 66), gm = Mat::Random(b, m1.cols());
  Mat a[4], c[4];
  fk_backward(skel, root, pose, beta, g1, gj, gm, a[0], a[1], a[2], a[3], Exec::Serial);
  fk_backward(skel, root, pose, beta, g2, gj, gm, c[0], c[1], c[2], c[3], Exec::Parallel);
  for (int i = 0; i < 4; ++i) CHECK(a[i] == c[i]);
}
