#include "motionprior/data/synthetic.hpp"
#include "motionprior/diff/ops.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/train/losses.hpp"
#include "motionprior/train/trainer.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

using namespace motionprior;
using namespace motionprior::train;
using diff::Tape;
using diff::Vec;

namespace {

const kin::Skeleton& skel() { return kin::Skeleton::default_humanoid(); }

model::CvaeConfig tiny_config() {
  model::CvaeConfig c;
  c.encoder_hidden = {32, 32};
  c.prior_hidden = {32, 32};
  c.decoder_hidden = {32, 32};
  c.groups = 4;
  return c;
}

std::vector<data::MotionClip> small_clips(std::uint64_t seed, int per_family, double dur) {
  data::SyntheticSpec spec;
  for (const auto& f : data::known_families()) spec.families.push_back({f, per_family, dur});
  return data::generate_synthetic(seed, spec);
}

}  // namespace

TEST_CASE("kl divergence of diagonal Gaussians") {
  const Vec z = Vec::Zero(1), o = Vec::Ones(1);
  CHECK(kl_diag_gaussians(o, z, o, z) == 0.0);
  CHECK(kl_diag_gaussians(o, z, z, z) == doctest::Approx(0.5).epsilon(1e-15));

  // Monte Carlo estimate of E_q[log q - log p] for q = N(1,1), p = N(0,1)
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(1.0, 1.0);
  const int n = 1000000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = nd(rng);
    acc += -0.5 * (x - 1.0) * (x - 1.0) + 0.5 * x * x;
  }
  CHECK(std::abs(acc / n - 0.5) < 1e-2);

  Vec mq = Vec::Random(5), lq = Vec::Random(5), mp = Vec::Random(5), lp = Vec::Random(5);
  CHECK(kl_diag_gaussians(mq, lq, mp, lp) >= 0.0);
  CHECK_THROWS_AS(kl_diag_gaussians(mq, lq, mp, Vec::Zero(4)), Error);
}

TEST_CASE("kl op matches the closed form and its gradient") {
  std::mt19937_64 rng(2);
  const int b = 3, d = 5;
  Vec x0(4 * b * d);
  for (int i = 0; i < x0.size(); ++i) x0[i] = std::normal_distribution<double>(0.0, 0.7)(rng);
  auto f = [&](const Vec& x, Vec* g) {
    Tape t;
    Var all = t.variable(Eigen::Map<const diff::Mat>(x.data(), b, 4 * d));
    model::GaussianVars q{diff::slice_cols(all, 0, d), diff::slice_cols(all, d, d)};
    model::GaussianVars p{diff::slice_cols(all, 2 * d, d), diff::slice_cols(all, 3 * d, d)};
    Var e = kl_diag_op(q, p);
    if (g) {
      t.backward(e);
      diff::Mat gm = t.grad(all);
      *g = Eigen::Map<const Vec>(gm.data(), gm.size());
    }
    return e.value()(0, 0);
  };
  CHECK(diff::grad_check(f, x0).max_rel_error < 1e-6);
  const diff::Mat m = Eigen::Map<const diff::Mat>(x0.data(), b, 4 * d);
  double ref = 0.0;
  for (int i = 0; i < b; ++i)
    ref += kl_diag_gaussians(m.row(i).segment(0, d).transpose(), m.row(i).segment(d, d).transpose(),
                             m.row(i).segment(2 * d, d).transpose(), m.row(i).segment(3 * d, d).transpose());
  CHECK(f(x0, nullptr) == doctest::Approx(ref / (b * d)).epsilon(1e-12));
}

TEST_CASE("reconstruction loss examples") {
  const Vec x = Vec::Random(207);
  CHECK(reconstruction_loss(x, x) == 0.0);
  Vec y = x;
  y[17] += 1.0;
  CHECK(reconstruction_loss(x, y) == doctest::Approx(1.0 / 207.0).epsilon(1e-14));
  Vec y2 = x;
  y2[17] -= 1.0;
  CHECK(reconstruction_loss(x, y2) == reconstruction_loss(x, y));
  Tape t;
  Var v = t.constant(y.transpose());
  CHECK(reconstruction_loss_op(v, x.transpose()).value()(0, 0) == doctest::Approx(1.0 / 207.0).epsilon(1e-14));
}

TEST_CASE("regularizer loss examples") {
  kin::MotionState s;
  s.r = Eigen::Vector3d(0, 0, 0.93);
  s.theta(3, 0) = 0.3;
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(16);
  kin::refresh_joints(skel(), beta, s);
  const diff::Mat truth = s.to_features().transpose();
  const diff::Mat b = beta.transpose();

  SUBCASE("perfect prediction") {
    Tape t;
    diff::Mat labels = diff::Mat::Zero(1, 8);
    RegularizerVars r = regularizer_losses(skel(), t.constant(truth), t.constant(diff::Mat::Constant(1, 8, -60.0)),
                                           truth, labels, b);
    CHECK(r.joint.value()(0, 0) < 1e-20);
    CHECK(r.consist.value()(0, 0) < 1e-20);
    CHECK(r.marker.value()(0, 0) < 1e-20);
    CHECK(r.bce.value()(0, 0) < 1e-20);
    CHECK(r.vel.value()(0, 0) == 0.0);
  }
  SUBCASE("contact velocity and bce") {
    kin::MotionState moving = s;
    moving.joints_dot.row(skel().contact_joints[2]) = Eigen::RowVector3d(0.0, 2.0, 0.0);
    const diff::Mat pred = moving.to_features().transpose();
    diff::Mat logits = diff::Mat::Constant(1, 8, -60.0);
    logits(0, 2) = 60.0;
    Tape t;
    RegularizerVars r = regularizer_losses(skel(), t.constant(pred), t.constant(logits), truth,
                                           diff::Mat::Zero(1, 8), b);
    CHECK(r.vel.value()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));

    Tape t2;
    RegularizerVars r2 = regularizer_losses(skel(), t2.constant(truth), t2.constant(diff::Mat::Zero(1, 8)), truth,
                                            diff::Mat::Ones(1, 8), b);
    CHECK(r2.bce.value()(0, 0) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  }
}

TEST_CASE("schedule tables") {
  TrainSchedule s;
  s.epochs = 200;
  s.supervised_epochs = 10;
  s.mixed_epochs = 10;
  for (int e = 0; e < 10; ++e) CHECK(s.truth_probability(e) == 1.0);
  double prev = 1.0;
  for (int e = 10; e < 20; ++e) {
    const double p = s.truth_probability(e);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p < prev);
    CHECK(p == doctest::Approx(1.0 - (e - 9) / 11.0).epsilon(1e-15));
    prev = p;
  }
  for (int e = 20; e < 200; ++e) CHECK(s.truth_probability(e) == 0.0);

  s.kl_anneal_epochs = 50;
  CHECK(s.kl_weight_at(0, 4e-4) == 0.0);
  CHECK(s.kl_weight_at(25, 4e-4) == doctest::Approx(2e-4).epsilon(1e-15));
  CHECK(s.kl_weight_at(50, 4e-4) == doctest::Approx(4e-4));
  CHECK(s.kl_weight_at(120, 4e-4) == doctest::Approx(4e-4));

  CHECK(s.lr_at(0) == 1e-4);
  CHECK(s.lr_at(49) == 1e-4);
  CHECK(s.lr_at(50) == 5e-5);
  CHECK(s.lr_at(80) == 2.5e-5);
  CHECK(s.lr_at(140) == 1.25e-5);
  CHECK(s.lr_at(199) == 1.25e-5);

  s.lr_stages = {{50, 1e-5}, {40, 1e-6}};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("training config json round trip") {
  TrainConfig c;
  c.schedule.epochs = 7;
  c.weights.w_kl = 1e-3;
  c.weights.vel = false;
  c.model.decoder_hidden = {64, 64};
  const TrainConfig d = TrainConfig::from_json(c.to_json());
  CHECK(d.schedule.epochs == 7);
  CHECK(d.weights.w_kl == 1e-3);
  CHECK_FALSE(d.weights.vel);
  CHECK(d.model.decoder_hidden == std::vector<int>{64, 64});
  CHECK(d.schedule.lr_stages == c.schedule.lr_stages);
  nlohmann::json bad = c.to_json();
  bad["schedule"]["batch"] = 0;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), Error);
}

TEST_CASE("batch loss gradient matches finite differences") {
  const auto clips = small_clips(3, 1, 1.0);
  model::Cvae m(tiny_config(), 4);
  // perturb output layers so every path carries gradient
  std::mt19937_64 prng(5);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (const auto& s : m.params().segments())
    if (s.name.rfind("enc.2", 0) == 0 || s.name.rfind("pri.2", 0) == 0 || s.name.rfind("dec.2", 0) == 0) {
      auto v = m.params().view(s.name);
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = u(prng);
    }
  std::mt19937_64 brng(6);
  const WindowBatch wb = sample_batch(clips, brng, 3, 4);
  LossWeights w;
  w.w_kl = 0.1;
  w.w_contact = 0.5;
  model::Cvae mm = m;
  auto f = [&](const Vec& p, Vec* g) {
    mm.params().values() = p;
    std::mt19937_64 rng(9);
    return run_batch(mm, skel(), wb, w, w.w_kl, 1.0, false, rng, g).total;
  };
  std::vector<Eigen::Index> coords;
  std::uniform_int_distribution<Eigen::Index> pick(0, m.params().size() - 1);
  for (int i = 0; i < 200; ++i) coords.push_back(pick(prng));
  CHECK(diff::grad_check(f, m.params().values(), 1e-5, coords).max_rel_error < 1e-4);
}

TEST_CASE("one epoch at zero learning rate leaves parameters unchanged") {
  const auto clips = small_clips(4, 2, 1.0);
  model::Cvae m(tiny_config(), 1);
  const Vec before = m.params().values();
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.schedule.epochs = 1;
  cfg.schedule.windows_per_epoch = 32;
  cfg.schedule.batch = 16;
  cfg.schedule.val_windows = 8;
  cfg.schedule.lr = 0.0;
  cfg.schedule.lr_stages.clear();
  const TrainResult r = train_cvae(m, skel(), clips, clips, cfg);
  CHECK(r.curves.size() == 1);
  CHECK(m.params().values() == before);
}

TEST_CASE("plain autoencoding improves reconstruction") {
  const auto clips = small_clips(5, 2, 1.5);
  std::vector<data::MotionClip> train, val;
  for (std::size_t i = 0; i < clips.size(); ++i) (i % 2 ? val : train).push_back(clips[i]);
  model::Cvae m(tiny_config(), 2);
  auto [mu, sd] = feature_statistics(train);
  m.set_input_stats(mu, sd);
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.weights = {0.0, 0.0, false, false, false, false, false};
  cfg.schedule.epochs = 5;
  cfg.schedule.windows_per_epoch = 100;
  cfg.schedule.batch = 20;
  cfg.schedule.val_windows = 50;
  cfg.schedule.lr = 2e-3;
  cfg.schedule.lr_stages.clear();
  std::mt19937_64 vr(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const WindowBatch vb = sample_batch(val, vr, 50, 10);
  const double before = evaluate(m, skel(), vb, cfg.weights).rec;
  const TrainResult r = train_cvae(m, skel(), train, val, cfg);
  const double after = evaluate(m, skel(), vb, cfg.weights).rec;
  CHECK(after < before);
  CHECK(r.curves.back().epoch == 4);

  SUBCASE("resumed training continues epoch numbering") {
    const TrainResult r2 = train_cvae(m, skel(), train, val, cfg, 5);
    CHECK(r2.curves.front().epoch == 5);
  }
  SUBCASE("curves csv") {
    const auto path = (std::filesystem::temp_directory_path() / "mp_curves.csv").string();
    write_curves_csv(r.curves, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header.rfind("epoch,lr,w_kl,truth_prob,train_rec", 0) == 0);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
  }
}

TEST_CASE("empty splits are rejected") {
  model::Cvae m(tiny_config(), 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_cvae(m, skel(), {}, small_clips(1, 1, 1.0), cfg), Error);
}
