#pragma once

#include "motionprior/diff/tape.hpp"

#include <vector>

// Differentiable building blocks over batched row-major matrices.
namespace motionprior::diff {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast 1xM over rows
Var mul_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var linear(Var x, Var weight, Var bias);

Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);

Var sum(Var a);       // -> 1x1
Var mean(Var a);      // -> 1x1
Var sum_rows(Var a);  // -> 1xM, sums over the batch
Var sum_cols(Var a);  // -> Bx1, sums over features

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var gather_cols(Var a, const std::vector<int>& cols);
Var repeat_rows(Var row, Eigen::Index n);  // 1xM -> nxM

Var detach(Var a);

/// Group normalization per row: features split into `groups` contiguous groups,
/// each standardized, then scaled by gamma and shifted by beta (both 1xM).
Var group_norm(Var x, Var gamma, Var beta, int groups, double eps = 1e-5);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
Var bce_with_logits(Var logits, const Mat& targets);

/// Sum over entries of weight .* (a - target)^2.
Var weighted_sq_error(Var a, const Mat& target, const Mat& weight);

}  // namespace motionprior::diff
