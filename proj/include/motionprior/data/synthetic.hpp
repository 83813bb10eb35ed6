#pragma once

#include "motionprior/data/clip.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace motionprior::data {

struct FamilySpec {
  std::string family;  // idle-sway, walk-cycle, squat, reach, jump, sit-stand
  int count = 1;
  double duration = 3.0;  // seconds
};

/// Smooth random variation layered on the closed-form families, so the next
/// frame is not a deterministic function of the current one. Zero = off.
struct ClipVariation {
  double tempo = 0.0;  // std of the playback-rate deviation (fraction of nominal speed)
  double pose = 0.0;   // std of upper-body joint angle noise, radians
  double bandwidth = 1.0;  // Hz, natural frequency of both processes
};

struct SyntheticSpec {
  std::vector<FamilySpec> families;
  ClipVariation variation;
  double frame_rate = 30.0;
  double shape_range = 1.0;     // beta ~ U(-range, range)
  double position_range = 2.0;  // start xy ~ U(-range, range)

  static SyntheticSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

const std::vector<std::string>& known_families();

/// Closed-form kinematic clips on a z = 0 floor. Deterministic for (seed, spec);
/// each clip draws from its own generator stream so clips can be built in parallel.
std::vector<MotionClip> generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec,
                                           const kin::Skeleton& skel = kin::Skeleton::default_humanoid());

/// One clip of one family.
MotionClip generate_clip(const std::string& family, double duration, double frame_rate, double shape_range,
                         double position_range, std::uint64_t seed, const kin::Skeleton& skel,
                         const ClipVariation& variation = {});

}  // namespace motionprior::data
