#pragma once

#include "motionprior/data/clip.hpp"
#include "motionprior/kin/ground.hpp"
#include "motionprior/kin/skeleton.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace motionprior::metrics {

/// One P x 3 matrix of points per frame. Every function works in the input
/// units (meters); the report converts positions to cm.
using PointSeq = std::vector<Eigen::MatrixXd>;

PointSeq joint_positions(const data::MotionClip& clip);

struct Displacement {
  double ade = 0.0;
  double fde = 0.0;
};

/// Mean point distance over all frames, and over the final frame.
Displacement ade_fde(const PointSeq& pred, const PointSeq& truth);

/// Mean point distance over all unordered pairs of samples (and frames, points).
double apd(const std::vector<PointSeq>& samples);

/// ||p_{t-1} - 2 p_t + p_{t+1}|| / h^2 for interior frames: (F-2) x P.
Eigen::MatrixXd accel(const PointSeq& seq, double h = 1.0 / 30.0);
/// Pooled over points and interior frames; 0 for fewer than 3 frames.
double mean_accel(const PointSeq& seq, double h = 1.0 / 30.0);

/// Penetration thresholds, meters.
inline const std::vector<double> kPenetrationThresholds{0.0, 0.03, 0.06, 0.09, 0.12, 0.15};

struct Penetration {
  double freq = 0.0;                   // mean over thresholds
  std::vector<double> freq_per_threshold;
  double dist = 0.0;                   // non-penetrating entries count as 0
};

/// heights: F x K signed heights above the floor. Frequency counts d > thresh
/// (strict) over all F*K entries.
Penetration penetration_from_heights(const Eigen::MatrixXd& heights,
                                     const std::vector<double>& thresholds = kPenetrationThresholds);
/// Heights of the given joints above the plane (g = 0 is the z = 0 floor).
Eigen::MatrixXd heights_above(const PointSeq& seq, const std::vector<int>& ids, const kin::GroundPlane& ground);
Penetration penetration(const PointSeq& joints, const std::vector<int>& toe_ids, const kin::GroundPlane& ground,
                        const std::vector<double>& thresholds = kPenetrationThresholds);

/// Fraction of entries with (prob >= cutoff) == (label >= 0.5).
double contact_accuracy(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& labels, double cutoff = 0.5);

struct PositionalErrors {
  double vis = 0.0, occ = 0.0, all = 0.0, legs = 0.0;
  long n_vis = 0, n_occ = 0, n_legs = 0;
};

/// visibility is F x P (non-zero = visible). Means over the matching entries; 0 when empty.
PositionalErrors positional_errors(const PointSeq& pred, const PointSeq& truth, const Eigen::MatrixXd& visibility,
                                   const std::vector<int>& leg_ids);

/// Mean joint error after subtracting each frame's root (point 0).
double root_aligned_error(const PointSeq& pred, const PointSeq& truth);

/// Marker indices attached to the leg joints.
std::vector<int> leg_marker_ids(const kin::Skeleton& skel);

/// Metrics of one sequence. Fields that do not apply stay empty.
struct SequenceReport {
  std::string name;
  std::optional<double> ade, fde, apd;          // cm
  std::optional<double> accel, accel_truth;     // m/s^2
  std::optional<double> pen_freq, pen_dist;     // fraction, cm
  std::optional<double> contact_acc;
  std::optional<double> pos_vis, pos_occ, pos_all, pos_legs, root_aligned;  // cm
};

struct EvalReport {
  std::vector<SequenceReport> sequences;
  SequenceReport aggregate;  // mean over the sequences that have each field

  void finalize();
  nlohmann::json to_json() const;
  std::string to_csv() const;
  void save(const std::string& json_path, const std::string& csv_path) const;
};

/// Everything needed to score one sequence.
struct EvalInput {
  std::string name;
  data::MotionClip truth;
  std::optional<data::MotionClip> pred;             // fitted or reconstructed motion
  std::vector<data::MotionClip> samples;            // futures for ADE/FDE/APD
  std::optional<Eigen::MatrixXd> contact_probs;     // F x 8
  std::optional<Eigen::MatrixXd> visibility;        // F x P
  bool points_are_markers = false;                  // visibility refers to markers
  kin::GroundPlane ground;                          // floor of the predicted motion
};

/// Best-of-N ADE (with its FDE) over samples, APD over samples, Accel and
/// penetration of the prediction, contact accuracy, positional errors.
SequenceReport evaluate_sequence(const EvalInput& in, const kin::Skeleton& skel);

EvalReport evaluate(const std::vector<EvalInput>& inputs, const kin::Skeleton& skel);

}  // namespace motionprior::metrics
