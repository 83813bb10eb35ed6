#pragma once

#include "motionprior/kin/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace motionprior::cli {

/// Command config: defaults, then the --config file, then flat `--key value`
/// overrides (dotted keys reach into objects, dashes become underscores),
/// then MOTIONPRIOR_SEED.
nlohmann::json build_config(const nlohmann::json& defaults, const std::string& config_path,
                            const std::vector<std::string>& overrides);

/// Applies `--key value` / `--flag` tokens. Values parse as JSON when they can.
void apply_overrides(nlohmann::json& cfg, const std::vector<std::string>& tokens);

/// Recursive merge: objects merge key by key, everything else is replaced.
void merge_into(nlohmann::json& dst, const nlohmann::json& src);

/// cfg["skeleton"] when set, else the default humanoid.
kin::Skeleton skeleton_of(const nlohmann::json& cfg);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

std::string str(const nlohmann::json& cfg, const std::string& key);

}  // namespace motionprior::cli
