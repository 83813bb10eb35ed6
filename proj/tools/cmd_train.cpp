#include "commands.hpp"
#include "config.hpp"

#include "motionprior/data/dataset.hpp"
#include "motionprior/error.hpp"
#include "motionprior/gmm/gmm.hpp"
#include "motionprior/log.hpp"
#include "motionprior/train/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <random>

namespace fs = std::filesystem;

namespace motionprior::cli {

// Desk-scale schedule: 30 epochs, KL annealed over the first 15.
nlohmann::json train_defaults() {
  train::TrainConfig tc;
  tc.schedule.epochs = 30;
  tc.schedule.lr = 1e-3;
  tc.schedule.lr_stages = {{15, 5e-4}, {24, 2.5e-4}};
  tc.schedule.kl_anneal_epochs = 15;
  tc.schedule.supervised_epochs = 10;
  tc.schedule.mixed_epochs = 10;
  nlohmann::json j = tc.to_json();
  j["seed"] = 1;
  j["data"] = "dataset";
  j["out"] = "run";
  j["resume"] = "";
  j["gmm_stride"] = 1;
  return j;
}

int cmd_train(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const train::TrainConfig tc = train::TrainConfig::from_json(cfg);
  const std::string dir = str(cfg, "data");
  require(fs::exists(fs::path(dir) / "manifest.json"), ErrorKind::Config, "no dataset manifest in " + dir);
  const auto train_clips = data::load_split(dir, "train", skel.hash());
  const auto val_clips = data::load_split(dir, "val", skel.hash());
  const std::string out = str(cfg, "out");
  fs::create_directories(out);

  model::Cvae m;
  int start = 0;
  const std::string resume = cfg.value("resume", std::string());
  if (!resume.empty()) {
    m = model::load_checkpoint(resume);
    require(m.skeleton_hash.empty() || m.skeleton_hash == skel.hash(), ErrorKind::Config,
            "checkpoint skeleton does not match");
    start = m.train_meta.value("epochs", 0);
    log_info("resuming at epoch " + std::to_string(start));
  } else {
    m = model::Cvae(tc.model, tc.seed);
    const auto [mean, std] = train::feature_statistics(train_clips);
    m.set_input_stats(mean, std);
  }

  const train::TrainResult res = train::train_cvae(m, skel, train_clips, val_clips, tc, start);
  m.skeleton_hash = skel.hash();
  m.train_meta = {{"epochs", start + static_cast<int>(res.curves.size())},
                  {"best_epoch", res.best_epoch},
                  {"best_val", res.best_val},
                  {"config", tc.to_json()}};
  model::save_checkpoint(m, (fs::path(out) / "model.ckpt").string());
  train::write_curves_csv(res.curves, (fs::path(out) / "curves.csv").string(), !resume.empty());

  gmm::EmOptions eo;
  eo.reg = tc.gmm_reg;
  const auto em = gmm::fit_em(train::init_state_data(train_clips, cfg.at("gmm_stride").get<int>()),
                              tc.gmm_components, tc.seed, eo);
  gmm::save_gmm(em.gmm, (fs::path(out) / "init_gmm.bin").string(), skel.hash());
  log_info("wrote " + out + "/{model.ckpt, init_gmm.bin, curves.csv}");
  return 0;
}

nlohmann::json sample_defaults() {
  return {{"model", ""}, {"data", "dataset"}, {"split", "test"}, {"count", 50}, {"frames", 150},
          {"seed", 0},   {"out", "samples"},  {"init", ""}};
}

// Rolls the prior out from recorded initial states.
int cmd_sample(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const model::Cvae m = model::load_checkpoint(str(cfg, "model"));
  require(m.skeleton_hash.empty() || m.skeleton_hash == skel.hash(), ErrorKind::Config,
          "checkpoint skeleton does not match");
  const int count = cfg.at("count").get<int>();
  const int frames = cfg.at("frames").get<int>();
  require(count >= 1 && frames >= 2, ErrorKind::Config, "sample: count >= 1 and frames >= 2 required");
  const auto seed = cfg.at("seed").get<std::uint64_t>();

  std::vector<data::MotionClip> sources;
  const std::string init = cfg.value("init", std::string());
  if (!init.empty())
    sources.push_back(data::load_clip(init));
  else
    sources = data::load_split(str(cfg, "data"), cfg.at("split").get<std::string>(), skel.hash());
  require(!sources.empty(), ErrorKind::Config, "sample: no initial states");

  const std::string out = str(cfg, "out");
  fs::create_directories(out);
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(i));
    const data::MotionClip& src = sources[rng() % sources.size()];
    const int f0 = init.empty() ? static_cast<int>(rng() % static_cast<std::uint64_t>(src.frame_count())) : 0;
    data::MotionClip clip;
    char name[64];
    std::snprintf(name, sizeof name, "sample_%03d", i);
    clip.name = name;
    clip.frame_rate = src.frame_rate;
    clip.shape = src.shape;
    clip.generator = "prior-sample from " + src.name;
    clip.seed = seed;
    clip.states.push_back(src.states[static_cast<std::size_t>(f0)]);
    clip.contacts = Eigen::MatrixXd::Zero(frames, kin::kContactCount);
    clip.contacts.row(0) = src.contacts.row(f0);
    for (int t = 1; t < frames; ++t) {
      const model::Transition tr = m.sample_transition(clip.states.back(), rng);
      require(tr.next.finite(), ErrorKind::Divergence, std::string(name) + ": non-finite state at step " + std::to_string(t));
      clip.states.push_back(tr.next);
      clip.contacts.row(t) = (tr.contact_probs.array() >= 0.5).cast<double>().transpose();
    }
    data::save_clip(clip, (fs::path(out) / (clip.name + ".motion")).string(), skel.hash());
  }
  log_info("wrote " + std::to_string(count) + " samples to " + out);
  return 0;
}

}  // namespace motionprior::cli
