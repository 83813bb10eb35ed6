#pragma once

#include <nlohmann/json.hpp>

namespace motionprior::cli {

// Defaults of each command; the CLI merges the user's config on top.
nlohmann::json gen_data_defaults();
nlohmann::json make_obs_defaults();
nlohmann::json train_defaults();
nlohmann::json sample_defaults();
nlohmann::json fit_defaults();
nlohmann::json eval_defaults();
nlohmann::json check_defaults();

// Each returns the process exit code. Errors propagate as exceptions.
int cmd_gen_data(const nlohmann::json& cfg);
int cmd_make_obs(const nlohmann::json& cfg);
int cmd_train(const nlohmann::json& cfg);
int cmd_sample(const nlohmann::json& cfg);
int cmd_fit(const nlohmann::json& cfg);
int cmd_eval(const nlohmann::json& cfg);
int cmd_check(const nlohmann::json& cfg);

}  // namespace motionprior::cli
