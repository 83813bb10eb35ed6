#pragma once

#include "motionprior/diff/tape.hpp"
#include "motionprior/kernels/exec.hpp"
#include "motionprior/kin/skeleton.hpp"

namespace motionprior::kernels {

using diff::Mat;

/// Batched forward kinematics. Each row is one configuration:
///   r (B x 3), root_rot (B x 9), pose_rot (B x 9*21) row-major rotation
///   matrices, beta (B x 16, or 1 x 16 shared by all rows).
/// Outputs joints (B x 66), markers (B x 3M) and the global joint rotations
/// (B x 9*22) needed by the backward pass.
void fk_forward(const kin::Skeleton& skel, const Mat& r, const Mat& root_rot, const Mat& pose_rot,
                const Mat& beta, Mat& joints, Mat& markers, Mat& globals, Exec exec);

/// Vector-Jacobian product of fk_forward. g_joints / g_markers may be empty
/// (treated as zero). g_beta has one row per batch row.
void fk_backward(const kin::Skeleton& skel, const Mat& root_rot, const Mat& pose_rot,
                 const Mat& beta, const Mat& globals, const Mat& g_joints, const Mat& g_markers,
                 Mat& g_r, Mat& g_root_rot, Mat& g_pose_rot, Mat& g_beta, Exec exec);

}  // namespace motionprior::kernels
