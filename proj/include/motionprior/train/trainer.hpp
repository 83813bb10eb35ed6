#pragma once

#include "motionprior/data/clip.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/gmm/gmm.hpp"
#include "motionprior/model/cvae.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace motionprior::train {

using diff::Mat;

struct LossWeights {
  double w_kl = 4e-4;
  double w_contact = 0.01;  // scales bce + vel
  bool joint = true;
  bool consist = true;
  bool marker = true;
  bool bce = true;
  bool vel = true;

  void validate() const;
};

struct TrainSchedule {
  int epochs = 30;
  int windows_per_epoch = 2000;
  int batch = 64;
  int window = 10;
  int val_windows = 256;
  double lr = 1e-4;
  std::vector<std::pair<int, double>> lr_stages{{50, 5e-5}, {80, 2.5e-5}, {140, 1.25e-5}};  // (epoch, lr)
  int kl_anneal_epochs = 50;   // w_kl ramps linearly from 0 over these epochs
  int supervised_epochs = 10;  // ground-truth inputs only
  int mixed_epochs = 10;       // then ground-truth probability falls linearly to 0
  int patience = 0;            // stop after this many epochs without a better val loss (0 = off)

  void validate() const;
  double lr_at(int epoch) const;
  double kl_weight_at(int epoch, double w_kl) const;
  /// Probability of feeding the ground-truth previous state.
  double truth_probability(int epoch) const;
};

struct TrainConfig {
  model::CvaeConfig model;
  TrainSchedule schedule;
  LossWeights weights;
  std::uint64_t seed = 0;
  double adamax_beta1 = 0.9;
  double adamax_beta2 = 0.999;
  int gmm_components = 12;
  double gmm_reg = 1e-6;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct LossBreakdown {
  double rec = 0, kl = 0, joint = 0, consist = 0, marker = 0, bce = 0, vel = 0, total = 0;
  double contact_acc = 0;  // fraction of correctly classified contact flags (val only)
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0, w_kl = 0, truth_prob = 0;
  LossBreakdown train, val;
};

struct TrainResult {
  std::vector<EpochRecord> curves;
  int best_epoch = -1;
  double best_val = 0;
};

/// One window batch: `window` consecutive states per row, shapes and labels.
struct WindowBatch {
  std::vector<std::vector<kin::MotionState>> states;  // [row][time]
  std::vector<Eigen::MatrixXd> contacts;              // [row] window x 8
  Mat beta;                                           // rows x 16
};

WindowBatch sample_batch(const std::vector<data::MotionClip>& clips, std::mt19937_64& rng, int rows, int window);

/// Feature mean/std over the canonicalized frames of the clips (std floored).
std::pair<Mat, Mat> feature_statistics(const std::vector<data::MotionClip>& clips, double std_floor = 0.05);

/// Forward pass of one batch. With a gradient buffer it also backpropagates.
/// Scheduled sampling feeds the detached previous prediction for rows whose
/// Bernoulli(truth_prob) draw fails; posterior_mean replaces sampling of z.
LossBreakdown run_batch(const model::Cvae& m, const kin::Skeleton& skel, const WindowBatch& batch,
                        const LossWeights& w, double w_kl, double truth_prob, bool posterior_mean,
                        std::mt19937_64& rng, diff::Vec* grad);

/// Teacher-forced posterior-mean losses and contact accuracy.
LossBreakdown evaluate(const model::Cvae& m, const kin::Skeleton& skel, const WindowBatch& batch,
                       const LossWeights& w);

/// Trains in place and leaves the best-validation parameters in the model.
/// Epochs are numbered from start_epoch.
TrainResult train_cvae(model::Cvae& m, const kin::Skeleton& skel, const std::vector<data::MotionClip>& train,
                       const std::vector<data::MotionClip>& val, const TrainConfig& cfg, int start_epoch = 0);

void write_curves_csv(const std::vector<EpochRecord>& curves, const std::string& path, bool append = false);

/// Canonical initial-state vectors of every `stride`-th frame.
Eigen::MatrixXd init_state_data(const std::vector<data::MotionClip>& clips, int stride = 1);

}  // namespace motionprior::train
