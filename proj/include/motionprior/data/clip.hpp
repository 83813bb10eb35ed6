#pragma once

#include "motionprior/kin/state.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace motionprior::data {

inline constexpr char kMotionMagic[] = "MPMOTION";
inline constexpr std::uint32_t kMotionVersion = 1;

struct MotionClip {
  std::string name;
  double frame_rate = 30.0;
  std::vector<kin::MotionState> states;
  Eigen::MatrixXd contacts;  // frames x 8, values 0/1
  Eigen::VectorXd shape = Eigen::VectorXd::Zero(kin::kShapeDim);
  std::string generator;
  std::uint64_t seed = 0;

  int frame_count() const { return static_cast<int>(states.size()); }
  double frame_time() const { return 1.0 / frame_rate; }

  /// Finite frames, matching contact rows, and linear velocities equal to
  /// backward differences of positions within `vel_tol`.
  void validate(double vel_tol = 1e-6) const;
};

void save_clip(const MotionClip& clip, const std::string& path, const std::string& skeleton_hash);
MotionClip load_clip(const std::string& path, std::string* skeleton_hash = nullptr);

/// `length` consecutive states from a uniformly chosen clip at a uniform offset.
std::vector<kin::MotionState> sample_training_window(const std::vector<MotionClip>& dataset, std::mt19937_64& rng,
                                                     int length = 10, int* clip_index = nullptr,
                                                     int* start = nullptr);

}  // namespace motionprior::data
