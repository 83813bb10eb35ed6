#include "motionprior/kernels/chamfer.hpp"

#include "motionprior/error.hpp"

#include <limits>

namespace motionprior::kernels {

namespace {

inline void nearest_one(const Points& queries, const Points& points, Eigen::Index i, int& best, double& best_d) {
  best = -1;
  best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const double d = (queries.row(i) - points.row(p)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(p);
    }
  }
}

}  // namespace

void nearest_points(const Points& queries, const Points& points, std::vector<int>& index, Eigen::VectorXd& sq_dist,
                    Exec exec) {
  require(points.rows() > 0, ErrorKind::Precondition, "nearest_points: no candidate points");
  const Eigen::Index n = queries.rows();
  index.assign(static_cast<std::size_t>(n), -1);
  sq_dist.resize(n);
  if (exec == Exec::Serial) {
    for (Eigen::Index i = 0; i < n; ++i) nearest_one(queries, points, i, index[i], sq_dist[i]);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) nearest_one(queries, points, i, index[i], sq_dist[i]);
}

}  // namespace motionprior::kernels
