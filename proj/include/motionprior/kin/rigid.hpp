#pragma once

#include "motionprior/diff/tape.hpp"

#include <vector>

namespace motionprior::kin {

using diff::Mat;

/// How a block of columns responds to a rigid transform (Q, t):
/// points map to Q p + t, vectors to Q v, row-major 3x3 matrices to Q M.
/// Columns not covered by any entry pass through unchanged.
enum class RigidKind { Point, Vector, Matrix };

struct RigidEntry {
  RigidKind kind;
  int offset;
  int count;  // number of consecutive points / vectors / matrices
};

using RigidLayout = std::vector<RigidEntry>;

/// Layout of the 339-scalar feature form.
const RigidLayout& feature_rigid_layout();
/// n consecutive 3D points starting at column 0.
RigidLayout points_layout(int n);

/// Transform parameters are rows of 12: Q (row-major 3x3) then t. A single
/// parameter row is broadcast over the batch.
Mat rigid_apply(const Mat& x, const Mat& params, const RigidLayout& layout, bool inverse);

/// Vector-Jacobian product of rigid_apply. gx is B x C; gparams has one row per batch row.
void rigid_backward(const Mat& x, const Mat& params, const RigidLayout& layout, bool inverse,
                    const Mat& gy, Mat* gx, Mat* gparams);

/// Canonical-frame transform of each feature row: moves the root to the
/// z axis and turns the root's +x axis onto +x (yaw only). Degenerate rows
/// (root +x axis parallel to z) use yaw 0 and are flagged.
Mat canonical_params(const Mat& features, std::vector<char>* degenerate = nullptr);

/// Jacobian of one canonical parameter row (12) w.r.t. (R00, R10, rx, ry).
Eigen::Matrix<double, 12, 4> canonical_params_jacobian(const double* feature_row);

/// Parameter row for yaw about +z applied after an xy shift: x' = Rz(yaw)(x + shift).
Mat yaw_shift_params(double yaw, double shift_x, double shift_y);

}  // namespace motionprior::kin
