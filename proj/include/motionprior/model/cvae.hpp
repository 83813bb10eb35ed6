#pragma once

#include "motionprior/diff/params.hpp"
#include "motionprior/diff/tape.hpp"
#include "motionprior/kin/state.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

namespace motionprior::model {

using diff::Mat;
using diff::Var;

inline constexpr int kDeltaDim = kin::state_layout::kSize;  // 207
inline constexpr int kDecoderOut = kDeltaDim + kin::kContactCount;

struct CvaeConfig {
  int latent = 48;
  // hidden widths; each MLP has one more linear layer than it has hidden widths
  std::vector<int> encoder_hidden{256, 256, 256, 256};
  std::vector<int> prior_hidden{256, 256, 256, 256};
  std::vector<int> decoder_hidden{256, 256, 128};
  int groups = 16;
  double log_sigma_min = -8.0;
  double log_sigma_max = 4.0;

  void validate() const;
  nlohmann::json to_json() const;
  static CvaeConfig from_json(const nlohmann::json& j);
};

struct Gaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_sigma;
};

struct DecoderOutput {
  Eigen::VectorXd delta;          // 207, canonical frame
  Eigen::VectorXd contact_probs;  // 8
  kin::MotionState next;          // world frame
};

struct Transition {
  kin::MotionState next;
  Eigen::VectorXd contact_probs;
  Eigen::VectorXd z;
};

struct GaussianVars {
  Var mu;
  Var log_sigma;
};

struct DecodeVars {
  Var delta;   // B x 207
  Var logits;  // B x 8
};

class Cvae;

/// Network parameters bound to a tape, either as trainable variables or constants.
struct CvaeVars {
  struct Layer {
    Var w, b, gamma, beta;
    bool norm = false;
  };
  std::vector<Layer> enc, pri, dec;
  Var in_mean, in_scale;  // constant input standardization rows
  std::vector<std::pair<Eigen::Index, Var>> bound;  // (param offset, var)

  /// Gradient of the last backward pass in ParamVector layout.
  diff::Vec gradient(const diff::Tape& tape, Eigen::Index size) const;
};

/// Outputs of one transition recorded on a tape.
struct StepVars {
  Var params;      // B x 12 canonical transform of the previous state
  Var prev_canon;  // B x 339
  Var next_canon;  // B x 339
  Var next_world;  // B x 339
  DecodeVars out;
  GaussianVars prior;  // valid only when requested
};

class Cvae {
 public:
  Cvae() = default;
  explicit Cvae(CvaeConfig cfg, std::uint64_t seed = 0);

  const CvaeConfig& config() const { return cfg_; }
  diff::ParamVector& params() { return params_; }
  const diff::ParamVector& params() const { return params_; }

  /// Per-feature input standardization (1 x 339 each). Defaults to identity.
  const Mat& input_mean() const { return in_mean_; }
  const Mat& input_std() const { return in_std_; }
  void set_input_stats(const Mat& mean, const Mat& std);

  std::string skeleton_hash;
  nlohmann::json train_meta = nlohmann::json::object();

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) hidden weights, zero output layers.
  void init_weights(std::uint64_t seed);

  CvaeVars bind(diff::Tape& tape, bool trainable) const;

  // Tape versions. All feature inputs are B x 339 rows in the canonical frame
  // of the previous state unless named *_world.
  GaussianVars encode_op(const CvaeVars& v, Var x_canon, Var prev_canon) const;
  GaussianVars prior_op(const CvaeVars& v, Var prev_canon) const;
  DecodeVars decode_op(const CvaeVars& v, Var z, Var prev_canon) const;
  /// One canonicalize -> decode -> integrate -> uncanonicalize step.
  StepVars step_op(const CvaeVars& v, Var prev_world, Var z, bool with_prior) const;

  // Plain versions on world-frame states.
  Gaussian encode(const kin::MotionState& x_t, const kin::MotionState& x_prev) const;
  Gaussian prior(const kin::MotionState& x_prev) const;
  DecoderOutput decode(const Eigen::VectorXd& z, const kin::MotionState& x_prev) const;
  Transition sample_transition(const kin::MotionState& x_prev, std::mt19937_64& rng) const;
  /// x_1..x_T for z rows 1..T. Throws a divergence error naming the step on
  /// non-finite states. contacts (T x 8) receives contact probabilities.
  std::vector<kin::MotionState> rollout(const kin::MotionState& x0, const Eigen::MatrixXd& z_seq,
                                        Eigen::MatrixXd* contacts = nullptr) const;

 private:
  Var run_mlp(const std::vector<CvaeVars::Layer>& layers, Var x, Var skip) const;
  Var normalize_input(const CvaeVars& v, Var feats) const;

  CvaeConfig cfg_;
  diff::ParamVector params_;
  Mat in_mean_;
  Mat in_std_;
};

/// Next canonical features from previous canonical features and a 207 delta.
/// Rotations compose as exp(delta) * R.
Var integrate_op(Var prev_canon, Var delta);

/// Feature rows (B x 339) -> state rows (B x 207) with rotations logged.
Var state_vector_op(Var features);

/// Log density of z under a diagonal Gaussian, summed over columns (B x 1).
Var gaussian_log_density_op(Var z, const GaussianVars& g);

inline constexpr char kCheckpointMagic[] = "MPCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Cvae& model, const std::string& path);
Cvae load_checkpoint(const std::string& path);

}  // namespace motionprior::model
