#pragma once

#include "motionprior/diff/tape.hpp"
#include "motionprior/fit/observation.hpp"
#include "motionprior/gmm/gmm.hpp"
#include "motionprior/kernels/exec.hpp"
#include "motionprior/kin/ground.hpp"
#include "motionprior/kin/state.hpp"
#include "motionprior/model/cvae.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace motionprior::fit {

using diff::Mat;
using diff::Var;
using diff::Vec;

struct EnergyWeights {
  double data = 1.0;
  double shape = 0.015;
  double cvae = 5e-4;
  double init = 5e-4;
  double c = 1.0;    // skeleton consistency
  double b = 10.0;   // bone length change
  double cv = 1.0;   // contact velocity
  double ch = 1.0;   // contact height
  double gnd = 0.0;
  double pose = 2e-4;   // initialization only
  double smooth = 0.1;  // initialization only

  double gm_sigma = 100.0;        // pixels
  double bisquare_kappa = 4.6851;
  double contact_height = 0.08;   // m
  double min_confidence = 0.3;

  void validate() const;
  nlohmann::json to_json() const;
  /// Either a preset name, or an object with an optional "preset" plus overrides.
  static EnergyWeights from_json(const nlohmann::json& j);
  /// occluded-keypoints, noisy-joints, rgb, rgbd.
  static EnergyWeights preset(const std::string& name);
};

/// sigma^2 r^2 / (sigma^2 + r^2).
double geman_mcclure(double r, double sigma);
/// (1 - (r/kappa)^2)^2 inside |r| < kappa, else 0.
double bisquare_weight(double rhat, double kappa);
/// 1.4826 * median(|r - median(r)|).
double mad_sigma(const Eigen::VectorXd& r);

/// Fitting reference frame: p_ref = Rz(-yaw) (p_obs - origin). Computed from the
/// observations so that fitting commutes with yaw and translation of the input.
struct ReferenceFrame {
  double yaw = 0.0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();

  Eigen::Matrix3d rotation() const;  // Rz(-yaw)
  Mat params() const;                // 1 x 12 rigid row obs -> ref
  Eigen::Vector3d to_ref(const Eigen::Vector3d& p) const;
  Eigen::Vector3d from_ref(const Eigen::Vector3d& p) const;
  /// Plane vector g (see GroundPlane) expressed in the other frame.
  Eigen::Vector3d plane_to_ref(const kin::GroundPlane& g) const;
  kin::GroundPlane plane_from_ref(const Eigen::Vector3d& g_ref) const;

  nlohmann::json to_json() const;
  static ReferenceFrame from_json(const nlohmann::json& j);
};

/// Rounds to a 2^-24 m grid. Fitting inputs in the reference frame are snapped
/// so that rigidly moved observations give bitwise-identical problems; the
/// optimizer path is sensitive enough that last-bit differences would otherwise
/// end in different local minima.
Eigen::Vector3d snap_to_grid(const Eigen::Vector3d& v);

/// Observation data term on points already in the reference frame.
class DataTerm {
 public:
  DataTerm(const Observation& obs, const Camera& cam, const ReferenceFrame& ref, const EnergyWeights& w,
           const kin::Skeleton& skel, kernels::Exec exec = kernels::Exec::Parallel);

  /// joints F x 66 and markers F x 3M, reference frame. Unweighted energy (1 x 1).
  Var energy(Var joints, Var markers) const;

  int frames() const { return frames_; }
  ObsKind kind() const { return kind_; }
  /// Observation points of frame t in the reference frame (P x 3; clouds and 3D variants).
  const Eigen::MatrixXd& ref_points(int t) const { return ref_points_[t]; }
  const Eigen::VectorXd& ref_weights(int t) const { return ref_weights_[t]; }
  /// Camera rotation/translation taking reference points into the camera frame.
  const Mat& camera_params() const { return cam_params_; }
  const Camera& camera() const { return cam_; }

 private:
  ObsKind kind_;
  int frames_ = 0;
  double sigma_ = 100.0;
  double kappa_ = 4.6851;
  kernels::Exec exec_;
  Camera cam_;
  Mat cam_params_;
  Mat target_, weight_;  // F x 3P (3D) or F x 2P (2D); weight F x 3P or F x P
  std::vector<Eigen::MatrixXd> ref_points_;
  std::vector<Eigen::VectorXd> ref_weights_;
};

/// Differentiable pieces, exposed for tests.
/// Sum over rows/points of conf * rho(||project(p) - y||, sigma) with camera-frame points.
Var projected_gm_op(Var cam_points, const Mat& target, const Mat& conf, const Camera& intr, double sigma);
/// One-way chamfer from every cloud point to the nearest body point with
/// bisquare weights on MAD-normalized distances pooled over all frames.
/// body is F x 3K; clouds[t] is N_t x 3.
Var chamfer_bisquare_op(Var body, const std::vector<Eigen::MatrixXd>& clouds, double kappa, kernels::Exec exec);

struct EnergyBreakdown {
  double data = 0, shape = 0, cvae = 0, init = 0, skel = 0, env = 0, gnd = 0, pose = 0, smooth = 0;
  double total() const { return data + shape + cvae + init + skel + env + gnd + pose + smooth; }
  nlohmann::json to_json() const;
};

/// Variables of the full fit, in the ground frame of g (states) and the
/// reference frame (g itself).
struct FitVariables {
  kin::MotionState x0;   // joints are recomputed from the pose and ignored as a variable
  Eigen::MatrixXd z_seq;  // T x latent
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(kin::kShapeDim);
  ReferenceFrame ref;
};

/// Rolled-out outputs of one energy evaluation.
struct RolloutOutputs {
  Mat features;   // (T+1) x 339, ground frame, joints as regressed
  Mat fk_joints;  // (T+1) x 66, ground frame
  Mat contacts;   // T x 8 probabilities
  Mat ground;     // 1 x 12 reference -> ground frame parameters
};

/// Total fitting energy over a flat vector [x0 (141) | z (T x L) | g (3) | beta (16)].
class FitEnergy {
 public:
  static constexpr int kX0Size = 3 + 3 + 3 + 3 + 3 * kin::kBoneCount + 3 * kin::kJointCount;  // 141

  FitEnergy(const model::Cvae& model, const gmm::InitGmm& gmm, const kin::Skeleton& skel, const DataTerm& data,
            const EnergyWeights& w, const Eigen::Vector3d& g_init_ref, int steps,
            kernels::Exec exec = kernels::Exec::Parallel);

  int steps() const { return steps_; }
  int latent() const { return latent_; }
  Eigen::Index size() const { return kX0Size + steps_ * latent_ + 3 + kin::kShapeDim; }
  Eigen::Index z_offset() const { return kX0Size; }
  Eigen::Index g_offset() const { return kX0Size + steps_ * latent_; }
  Eigen::Index beta_offset() const { return g_offset() + 3; }

  Vec pack(const FitVariables& v) const;
  /// Copies x into v (keeps v.ref). x0.joints are refreshed by forward kinematics.
  void unpack(const Vec& x, FitVariables& v) const;

  /// Energy and optional gradient. Rollout failures give +inf.
  double evaluate(const Vec& x, Vec* grad, EnergyBreakdown* parts = nullptr, RolloutOutputs* out = nullptr) const;

 private:
  const model::Cvae& model_;
  const gmm::InitGmm& gmm_;
  const kin::Skeleton& skel_;
  const DataTerm& data_;
  EnergyWeights w_;
  Eigen::Vector3d g_init_;
  int steps_;
  int latent_;
  kernels::Exec exec_;
};

/// Initialization energy over per-frame [r (F x 3) | phi (F x 3) | theta (F x 63) | beta (16)]
/// in the reference frame: data + shape + pose + smoothness.
class InitEnergy {
 public:
  InitEnergy(const kin::Skeleton& skel, const DataTerm& data, const EnergyWeights& w,
             kernels::Exec exec = kernels::Exec::Parallel);

  int frames() const { return frames_; }
  Eigen::Index size() const { return frames_ * (6 + 3 * kin::kBoneCount) + kin::kShapeDim; }
  Eigen::Index phi_offset() const { return 3 * frames_; }
  Eigen::Index theta_offset() const { return 6 * frames_; }
  Eigen::Index beta_offset() const { return frames_ * (6 + 3 * kin::kBoneCount); }

  double evaluate(const Vec& x, Vec* grad, EnergyBreakdown* parts = nullptr) const;

 private:
  const kin::Skeleton& skel_;
  const DataTerm& data_;
  EnergyWeights w_;
  int frames_;
  kernels::Exec exec_;
};

}  // namespace motionprior::fit
