#pragma once

#include "motionprior/kernels/exec.hpp"

#include <Eigen/Dense>

#include <vector>

namespace motionprior::kernels {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Brute-force nearest neighbour of every query among `points`. Ties go to the
/// lower index so serial and parallel runs agree exactly.
void nearest_points(const Points& queries, const Points& points, std::vector<int>& index,
                    Eigen::VectorXd& sq_dist, Exec exec);

}  // namespace motionprior::kernels
