// Serial reference vs OpenMP path of each parallel kernel.
#include "motionprior/kernels/chamfer.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kernels/gmm.hpp"
#include "motionprior/kin/rotation.hpp"
#include "motionprior/kin/skeleton.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace motionprior;
using kernels::Exec;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

diff::Mat random_rotations(Eigen::Index rows, int per_row, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.4);
  diff::Mat out(rows, 9 * per_row);
  for (Eigen::Index b = 0; b < rows; ++b)
    for (int k = 0; k < per_row; ++k) {
      const Eigen::Matrix3d r = kin::rodrigues(Eigen::Vector3d(nd(rng), nd(rng), nd(rng)));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out(b, 9 * k + 3 * i + j) = r(i, j);
    }
  return out;
}

void BM_fk_forward(benchmark::State& state) {
  const auto& skel = kin::Skeleton::default_humanoid();
  const Eigen::Index rows = state.range(0);
  std::mt19937_64 rng(1);
  const diff::Mat r = diff::Mat::Random(rows, 3);
  const diff::Mat root = random_rotations(rows, 1, rng);
  const diff::Mat pose = random_rotations(rows, kin::kBoneCount, rng);
  const diff::Mat beta = diff::Mat::Random(1, kin::kShapeDim);
  diff::Mat joints, markers, globals;
  for (auto _ : state) {
    kernels::fk_forward(skel, r, root, pose, beta, joints, markers, globals, exec_of(state));
    benchmark::DoNotOptimize(markers.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

void BM_fk_backward(benchmark::State& state) {
  const auto& skel = kin::Skeleton::default_humanoid();
  const Eigen::Index rows = state.range(0);
  std::mt19937_64 rng(2);
  const diff::Mat r = diff::Mat::Random(rows, 3);
  const diff::Mat root = random_rotations(rows, 1, rng);
  const diff::Mat pose = random_rotations(rows, kin::kBoneCount, rng);
  const diff::Mat beta = diff::Mat::Random(1, kin::kShapeDim);
  diff::Mat joints, markers, globals;
  kernels::fk_forward(skel, r, root, pose, beta, joints, markers, globals, Exec::Serial);
  const diff::Mat gj = diff::Mat::Random(rows, joints.cols()), gm = diff::Mat::Random(rows, markers.cols());
  diff::Mat g_r, g_root, g_pose, g_beta;
  for (auto _ : state) {
    kernels::fk_backward(skel, root, pose, beta, globals, gj, gm, g_r, g_root, g_pose, g_beta, exec_of(state));
    benchmark::DoNotOptimize(g_pose.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

void BM_nearest_points(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  std::mt19937_64 rng(3);
  const kernels::Points queries = kernels::Points::Random(n, 3);
  const kernels::Points body = kernels::Points::Random(65, 3);
  std::vector<int> idx;
  Eigen::VectorXd d;
  for (auto _ : state) {
    kernels::nearest_points(queries, body, idx, d, exec_of(state));
    benchmark::DoNotOptimize(d.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void BM_gmm_log_joint(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const int k = 12, dim = 138;
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(n, dim);
  const Eigen::VectorXd lw = Eigen::VectorXd::Constant(k, -std::log(static_cast<double>(k)));
  const Eigen::MatrixXd means = Eigen::MatrixXd::Random(k, dim);
  std::vector<Eigen::MatrixXd> chol;
  for (int c = 0; c < k; ++c) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(dim, dim);
    const Eigen::MatrixXd cov = a * a.transpose() / dim + Eigen::MatrixXd::Identity(dim, dim);
    chol.push_back(cov.llt().matrixL());
  }
  Eigen::MatrixXd out;
  for (auto _ : state) {
    kernels::gmm_log_joint(x, lw, means, chol, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

// Second argument: 0 = serial reference, 1 = OpenMP.
BENCHMARK(BM_fk_forward)->ArgsProduct({{91, 1024}, {0, 1}});
BENCHMARK(BM_fk_backward)->ArgsProduct({{91, 1024}, {0, 1}});
BENCHMARK(BM_nearest_points)->ArgsProduct({{2000, 20000}, {0, 1}});
BENCHMARK(BM_gmm_log_joint)->ArgsProduct({{256, 4096}, {0, 1}});

BENCHMARK_MAIN();
