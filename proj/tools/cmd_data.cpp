#include "commands.hpp"
#include "config.hpp"

#include "motionprior/data/dataset.hpp"
#include "motionprior/error.hpp"
#include "motionprior/fit/fit.hpp"
#include "motionprior/log.hpp"

#include <filesystem>
#include <random>

namespace fs = std::filesystem;

namespace motionprior::cli {

nlohmann::json gen_data_defaults() {
  data::SyntheticSpec spec;
  for (const auto& f : data::known_families()) spec.families.push_back({f, 12, 4.0});
  spec.variation.tempo = 0.15;
  spec.variation.pose = 0.1;
  return {{"seed", 1}, {"out", "dataset"}, {"spec", spec.to_json()}, {"val_fraction", 0.1}, {"test_fraction", 0.1}};
}

int cmd_gen_data(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const data::SyntheticSpec spec = data::SyntheticSpec::from_json(cfg.at("spec"));
  const auto clips = data::generate_synthetic(seed, spec, skel);
  const auto split =
      data::split_dataset(clips, seed, cfg.at("val_fraction").get<double>(), cfg.at("test_fraction").get<double>());
  const std::string out = str(cfg, "out");
  fs::create_directories(out);
  data::write_dataset(out, split, skel, {{"seed", seed}, {"spec", spec.to_json()}});
  log_info("wrote " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" +
           std::to_string(split.test.size()) + " clips to " + out);
  return 0;
}

nlohmann::json make_obs_defaults() {
  return {{"clip", ""},      {"kind", "occluded-keypoints"}, {"noise", 0.04}, {"occlude_below", 0.9},
          {"noise_px", 3.0}, {"outliers", 0.1},              {"seed", 0},     {"frames", 0},
          {"out", ""}};
}

// Synthetic observation of a motion file, written as a fit problem.
int cmd_make_obs(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  std::string hash;
  data::MotionClip clip = data::load_clip(str(cfg, "clip"), &hash);
  if (const int n = cfg.at("frames").get<int>(); n > 0 && n < clip.frame_count()) {
    clip.states.resize(static_cast<std::size_t>(n));
    clip.contacts.conservativeResize(n, Eigen::NoChange);
  }
  const std::string kind = cfg.at("kind").get<std::string>();
  std::mt19937_64 rng(cfg.at("seed").get<std::uint64_t>());
  fit::FitProblem p;
  if (kind == "occluded-keypoints") {
    p.obs = fit::observe_keypoints(clip, skel, cfg.at("occlude_below").get<double>());
  } else if (kind == "noisy-joints") {
    p.obs = fit::observe_joints(clip, cfg.at("noise").get<double>(), rng);
  } else if (kind == "rgb") {
    p.camera = fit::Camera::look_at(clip.states[0].r + Eigen::Vector3d(0.0, -4.0, 0.5), clip.states[0].r);
    p.obs = fit::observe_joints2d(clip, p.camera, cfg.at("noise_px").get<double>(), rng);
  } else if (kind == "rgbd") {
    p.obs = fit::observe_point_cloud(clip, skel, cfg.at("noise").get<double>(), cfg.at("outliers").get<double>(), rng);
  } else {
    throw Error(ErrorKind::Config, "make-obs: unknown kind '" + kind + "'");
  }
  p.weights = fit::EnergyWeights::preset(kind);
  if (cfg.contains("weights")) {
    nlohmann::json w = p.weights.to_json();
    merge_into(w, cfg.at("weights"));
    p.weights = fit::EnergyWeights::from_json(w);
  }
  p.skeleton_hash = skel.hash();
  const std::string out = str(cfg, "out");
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  p.save(out, fs::path(out).stem().string() + ".obs");
  return 0;
}

}  // namespace motionprior::cli
