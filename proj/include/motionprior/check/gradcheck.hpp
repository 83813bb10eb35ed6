#pragma once

#include "motionprior/diff/optim.hpp"
#include "motionprior/gmm/gmm.hpp"
#include "motionprior/model/cvae.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace motionprior::check {

/// One random instance: objective, point, and the coordinates to difference
/// (empty = all).
struct CheckCase {
  diff::DiffFunction f;
  diff::Vec x;
  std::vector<Eigen::Index> coords;
};

struct CheckEntry {
  std::string name;
  double tolerance = 1e-4;
  std::function<CheckCase(std::mt19937_64&)> make;
};

struct EntryReport {
  std::string name;
  double tolerance = 0.0;
  double worst = 0.0;
  int instances = 0;
  double seconds = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::vector<EntryReport> entries;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

struct CheckOptions {
  int instances = 20;
  std::uint64_t seed = 0;
  double eps = 1e-6;
  /// Debug hook: entries with this name get a deliberately wrong gradient.
  std::string corrupt;
};

/// Copy of the model with small random output layers, so that every path
/// (including the latent) carries gradient.
model::Cvae randomized_outputs(const model::Cvae& m, std::uint64_t seed, double scale = 0.02);

/// Every differentiable operation the fitting and training code relies on:
/// forward kinematics, encoder/prior/decoder (inputs and parameters), the GMM
/// log-likelihood, the initialization energies, each fitting energy term
/// through a 5-step rollout, and the rollout itself.
std::vector<CheckEntry> gradient_registry(const model::Cvae& m, const kin::Skeleton& skel,
                                          const gmm::InitGmm* gmm = nullptr);

CheckReport run_gradient_checks(const std::vector<CheckEntry>& entries, const CheckOptions& opts);

}  // namespace motionprior::check
