#pragma once

#include "motionprior/data/clip.hpp"
#include "motionprior/data/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace motionprior::data {

struct DatasetSplit {
  std::vector<MotionClip> train;
  std::vector<MotionClip> val;
  std::vector<MotionClip> test;
};

/// Deterministic shuffle by `seed`, then contiguous fractions. Each family is
/// split separately so every split sees every family.
DatasetSplit split_dataset(const std::vector<MotionClip>& clips, std::uint64_t seed, double val_fraction = 0.1,
                           double test_fraction = 0.1);

/// Writes <dir>/{train,val,test}/<name>.motion and <dir>/manifest.json.
nlohmann::json write_dataset(const std::string& dir, const DatasetSplit& split, const kin::Skeleton& skel,
                             const nlohmann::json& extra_meta);

/// Loads one split ("train", "val" or "test") listed in <dir>/manifest.json.
std::vector<MotionClip> load_split(const std::string& dir, const std::string& split,
                                   const std::string& expect_skeleton_hash = "");

}  // namespace motionprior::data
