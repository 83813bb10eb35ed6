#pragma once

#include "motionprior/data/clip.hpp"
#include "motionprior/fit/energy.hpp"

#include <array>
#include <string>
#include <vector>

namespace motionprior::fit {

struct FitOptions {
  std::array<int, 3> stages{30, 25, 15};
  int stage1_frames = 15;            // latents optimized in the first stage
  std::array<int, 2> init_stages{30, 80};  // root only, then everything
  int history = 10;                  // L-BFGS memory
  int track_iters = 0;               // per-step latent refinement after encoding (0 = encoder means only)
  kernels::Exec exec = kernels::Exec::Parallel;

  void validate() const;
  nlohmann::json to_json() const;
  static FitOptions from_json(const nlohmann::json& j);
};

/// Reference frame of an observation: labelled 3D data align a rest template
/// to frame 0 (yaw) around the centroid of the visible frame-0 points; 2D data
/// and clouds keep yaw 0. The origin never lies on the initial ground plane.
ReferenceFrame choose_reference_frame(const Observation& obs, const Camera& cam, const kin::Skeleton& skel,
                                      const kin::GroundPlane& g_init);

struct InitResult {
  FitVariables vars;                          // ground frame, z from the encoder (empty without a model)
  std::vector<kin::MotionState> states;        // observation frame, per-frame fit (joints from FK)
  std::vector<kin::MotionState> ground_states;  // same in the ground frame of g_init
  EnergyBreakdown energy;
  std::vector<double> trace;
};

/// Per-frame pose fit with data, shape, pose and smoothness terms, followed by
/// latent inference with the encoder when a model is given.
InitResult initialize_fit(const Observation& obs, const Camera& cam, const kin::Skeleton& skel,
                          const EnergyWeights& w, const kin::GroundPlane& g_init, const model::Cvae* model = nullptr,
                          const FitOptions& opts = {});

struct FitResult {
  std::vector<kin::MotionState> states;  // observation frame, joints from FK
  Eigen::MatrixXd contacts;               // frames x 8 probabilities; frame 0 copies frame 1
  kin::GroundPlane ground;                // observation frame
  Eigen::VectorXd beta;
  std::vector<double> energy_trace;       // start value, then one entry per accepted iteration
  std::vector<int> stage_ends;            // trace index at the end of each stage
  double init_energy = 0.0;
  double final_energy = 0.0;
  EnergyBreakdown breakdown;
  bool diverged = false;                  // a stage failed; best-seen iterate returned
  FitVariables vars;
};

/// Three-stage L-BFGS from given variables. g_init is in the observation frame.
FitResult fit_from(const model::Cvae& model, const gmm::InitGmm& gmm, const Observation& obs, const Camera& cam,
                   const kin::Skeleton& skel, const EnergyWeights& w, const kin::GroundPlane& g_init,
                   const FitVariables& start, const FitOptions& opts = {});

/// initialize_fit followed by fit_from.
FitResult fit(const model::Cvae& model, const gmm::InitGmm& gmm, const Observation& obs, const Camera& cam,
              const kin::Skeleton& skel, const EnergyWeights& w, const kin::GroundPlane& g_init,
              const FitOptions& opts = {}, InitResult* init_out = nullptr);

/// Variables for an observation-frame initial state and latents.
FitVariables make_variables(const kin::MotionState& x0_obs, const Eigen::MatrixXd& z_seq,
                            const Eigen::VectorXd& beta, const ReferenceFrame& ref, const kin::GroundPlane& g_obs);

/// Rolls the variables out and returns observation-frame states (joints from FK).
std::vector<kin::MotionState> rollout_states(const model::Cvae& model, const kin::Skeleton& skel,
                                             const FitVariables& v, Eigen::MatrixXd* contacts = nullptr);

/// Fit problem file: observation (inline or a path relative to the file), camera,
/// weights (preset name or overrides), stage counts, optional ground and skeleton hash.
struct FitProblem {
  Observation obs;
  Camera camera;
  EnergyWeights weights;
  kin::GroundPlane g_init;
  FitOptions options;
  std::string skeleton_hash;

  static FitProblem load(const std::string& path);
  /// Writes the observation next to the problem file as `obs_file`.
  void save(const std::string& path, const std::string& obs_file = "") const;
};

/// Motion file plus JSON sidecar (ground, shape, energy trace, contact probabilities).
void write_fit_result(const FitResult& r, const std::string& motion_path, const std::string& sidecar_path,
                      const std::string& skeleton_hash, double frame_rate, const std::string& name = "fit");
void write_init_result(const InitResult& r, const std::string& motion_path, const std::string& sidecar_path,
                       const std::string& skeleton_hash, double frame_rate, const std::string& name = "init");

}  // namespace motionprior::fit
