#pragma once

#include "motionprior/diff/tape.hpp"
#include "motionprior/kernels/exec.hpp"
#include "motionprior/kin/rigid.hpp"
#include "motionprior/kin/skeleton.hpp"

// Differentiable geometric ops recorded on a diff::Tape.
namespace motionprior::kin {

using diff::Var;

/// B x 3k axis-angles -> B x 9k row-major rotation matrices.
Var rodrigues_op(Var aa);
/// B x 9k rotations -> B x 3k axis-angles (smooth branch, angles below pi).
Var rotation_log_op(Var rot);
/// Blockwise product of B x 9k rotation blocks: out_k = a_k * b_k.
Var rotmat_mul_op(Var a, Var b);

struct FkVars {
  Var joints;   // B x 66
  Var markers;  // B x 3M
};
/// beta is B x 16 or 1 x 16.
FkVars fk_op(const Skeleton& skel, Var r, Var root_rot, Var pose_rot, Var beta,
             kernels::Exec exec = kernels::Exec::Parallel);

/// Feature rows (B x 339) -> canonical transform rows (B x 12).
Var canonical_params_op(Var features);
Var rigid_transform_op(Var x, Var params, const RigidLayout& layout, bool inverse);

/// 1 x 3 ground vector -> 1 x 12 observation-to-ground-frame parameters.
Var ground_params_op(Var g, const Eigen::Vector3d& up_hint);

/// B x 66 joints -> B x 21 bone lengths.
Var bone_lengths_op(const Skeleton& skel, Var joints);

}  // namespace motionprior::kin
