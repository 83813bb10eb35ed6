#include "commands.hpp"
#include "config.hpp"

#include "motionprior/check/gradcheck.hpp"
#include "motionprior/data/clip.hpp"
#include "motionprior/error.hpp"
#include "motionprior/fit/fit.hpp"
#include "motionprior/log.hpp"
#include "motionprior/metrics/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace motionprior::cli {

nlohmann::json fit_defaults() {
  return {{"problem", ""}, {"model", ""}, {"gmm", ""}, {"out", "fit"}, {"name", ""}, {"init_only", false}};
}

int cmd_fit(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const std::string problem_path = str(cfg, "problem");
  fit::FitProblem p = fit::FitProblem::load(problem_path);
  require(p.skeleton_hash.empty() || p.skeleton_hash == skel.hash(), ErrorKind::Config,
          "problem skeleton hash does not match the skeleton");
  if (cfg.contains("options")) {
    nlohmann::json o = p.options.to_json();
    merge_into(o, cfg.at("options"));
    p.options = fit::FitOptions::from_json(o);
  }
  if (cfg.contains("weights")) {
    nlohmann::json w = p.weights.to_json();
    merge_into(w, cfg.at("weights"));
    p.weights = fit::EnergyWeights::from_json(w);
  }
  p.obs.validate(skel);

  const std::string out = str(cfg, "out");
  fs::create_directories(out);
  std::string name = cfg.value("name", std::string());
  if (name.empty()) name = fs::path(problem_path).stem().string();
  const std::string motion = (fs::path(out) / (name + ".motion")).string();
  const std::string sidecar = (fs::path(out) / (name + ".json")).string();

  if (cfg.at("init_only").get<bool>()) {
    const fit::InitResult r = fit::initialize_fit(p.obs, p.camera, skel, p.weights, p.g_init, nullptr, p.options);
    fit::write_init_result(r, motion, sidecar, skel.hash(), p.obs.frame_rate, name);
    log_info("init-only result written to " + motion);
    return 0;
  }

  const model::Cvae m = model::load_checkpoint(str(cfg, "model"));
  require(m.skeleton_hash.empty() || m.skeleton_hash == skel.hash(), ErrorKind::Config,
          "checkpoint skeleton hash does not match the problem");
  std::string gmm_hash;
  const gmm::InitGmm g = gmm::load_gmm(str(cfg, "gmm"), &gmm_hash);
  require(gmm_hash.empty() || gmm_hash == skel.hash(), ErrorKind::Config, "GMM skeleton hash does not match");
  const fit::FitResult r = fit::fit(m, g, p.obs, p.camera, skel, p.weights, p.g_init, p.options);
  fit::write_fit_result(r, motion, sidecar, skel.hash(), p.obs.frame_rate, name);
  log_info("fit energy " + std::to_string(r.init_energy) + " -> " + std::to_string(r.final_energy) + ", written to " +
           motion);
  return r.diverged ? 3 : 0;
}

nlohmann::json eval_defaults() {
  return {{"truth", ""},   {"pred", ""},         {"samples", ""},  {"problems", ""},
          {"out", "eval"}, {"ground", "truth"}, {"frames", 0}};
}

namespace {

std::vector<fs::path> motion_files(const std::string& p) {
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.path().extension() == ".motion") out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else {
    require(fs::exists(p), ErrorKind::Config, "no such file " + p);
    out.emplace_back(p);
  }
  return out;
}

fs::path sibling(const std::string& dir, const std::string& stem, const std::string& ext) {
  if (dir.empty()) return {};
  const fs::path p = fs::path(dir) / (stem + ext);
  return fs::exists(p) ? p : fs::path();
}

data::MotionClip truncated(data::MotionClip c, int frames) {
  if (frames > 0 && frames < c.frame_count()) {
    c.states.resize(static_cast<std::size_t>(frames));
    c.contacts.conservativeResize(frames, Eigen::NoChange);
  }
  return c;
}

}  // namespace

// Truth files (or a directory of them) matched by file stem with predictions
// (<stem>.motion plus optional <stem>.json sidecar), samples (<stem>_*.motion)
// and fit problems (<stem>.json) for visibility masks.
int cmd_eval(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const std::string pred_dir = cfg.value("pred", std::string());
  const std::string samples_dir = cfg.value("samples", std::string());
  const std::string problems_dir = cfg.value("problems", std::string());
  const std::string ground_mode = cfg.at("ground").get<std::string>();
  require(ground_mode == "truth" || ground_mode == "pred", ErrorKind::Config, "eval: ground must be truth or pred");
  const int frames = cfg.at("frames").get<int>();

  std::vector<metrics::EvalInput> inputs;
  for (const auto& tp : motion_files(str(cfg, "truth"))) {
    metrics::EvalInput in;
    const std::string stem = tp.stem().string();
    in.name = stem;
    in.truth = truncated(data::load_clip(tp.string()), frames);
    if (const fs::path pp = sibling(pred_dir, stem, ".motion"); !pp.empty()) {
      in.pred = data::load_clip(pp.string());
      if (const fs::path sp = sibling(pred_dir, stem, ".json"); !sp.empty()) {
        const nlohmann::json side = read_json_file(sp.string());
        if (side.contains("contact_probs") && !side["contact_probs"].empty()) {
          const auto rows = side["contact_probs"].get<std::vector<std::vector<double>>>();
          Eigen::MatrixXd probs(static_cast<Eigen::Index>(rows.size()), kin::kContactCount);
          for (std::size_t i = 0; i < rows.size(); ++i)
            for (int k = 0; k < kin::kContactCount; ++k) probs(static_cast<Eigen::Index>(i), k) = rows[i].at(k);
          in.contact_probs = probs;
        }
        if (ground_mode == "pred" && side.contains("ground")) {
          const auto g = side["ground"].get<std::vector<double>>();
          in.ground.g = Eigen::Vector3d(g.at(0), g.at(1), g.at(2));
        }
      }
    }
    if (!samples_dir.empty() && fs::is_directory(samples_dir))
      for (const auto& e : motion_files(samples_dir))
        if (e.stem().string().rfind(stem + "_", 0) == 0) in.samples.push_back(data::load_clip(e.string()));
    // without sampled futures the prediction itself is scored for ADE/FDE
    if (in.samples.empty() && in.pred) in.samples.push_back(truncated(*in.pred, frames));
    if (const fs::path op = sibling(problems_dir, stem, ".json"); !op.empty()) {
      const fit::FitProblem p = fit::FitProblem::load(op.string());
      if (p.obs.kind == fit::ObsKind::Joints3D || p.obs.kind == fit::ObsKind::Keypoints3D) {
        Eigen::MatrixXd vis(p.obs.frame_count(), p.obs.points.front().rows());
        for (int t = 0; t < p.obs.frame_count(); ++t) vis.row(t) = p.obs.weights[static_cast<std::size_t>(t)].transpose();
        in.visibility = vis;
        in.points_are_markers = p.obs.kind == fit::ObsKind::Keypoints3D;
      }
    }
    inputs.push_back(std::move(in));
  }
  const metrics::EvalReport rep = metrics::evaluate(inputs, skel);
  const std::string out = str(cfg, "out");
  fs::create_directories(out);
  rep.save((fs::path(out) / "report.json").string(), (fs::path(out) / "report.csv").string());
  std::cout << rep.to_json()["aggregate"].dump(2) << "\n";
  return 0;
}

nlohmann::json check_defaults() {
  return {{"model", ""}, {"gmm", ""}, {"model_config", nlohmann::json::object()}, {"instances", 20},
          {"seed", 0},   {"eps", 1e-6}, {"corrupt", ""}, {"out", ""}};
}

// Gradient sweep; exit 0 iff every entry passes.
int cmd_check(const nlohmann::json& cfg) {
  const kin::Skeleton skel = skeleton_of(cfg);
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const std::string mp = cfg.value("model", std::string());
  const model::Cvae m = mp.empty()
                            ? check::randomized_outputs(
                                  model::Cvae(model::CvaeConfig::from_json(cfg.at("model_config")), seed), seed + 1)
                            : model::load_checkpoint(mp);
  std::optional<gmm::InitGmm> g;
  if (const std::string gp = cfg.value("gmm", std::string()); !gp.empty()) g = gmm::load_gmm(gp);
  check::CheckOptions o;
  o.instances = cfg.at("instances").get<int>();
  o.seed = seed;
  o.eps = cfg.at("eps").get<double>();
  o.corrupt = cfg.at("corrupt").get<std::string>();
  const check::CheckReport rep = check::run_gradient_checks(check::gradient_registry(m, skel, g ? &*g : nullptr), o);
  for (const auto& e : rep.entries)
    std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << "  worst rel error " << e.worst << " (tol " << e.tolerance
              << ", " << e.instances << " instances, " << e.seconds << " s)\n";
  if (const std::string out = cfg.value("out", std::string()); !out.empty()) write_json_file(rep.to_json(), out);
  return rep.all_pass() ? 0 : 3;
}

}  // namespace motionprior::cli
