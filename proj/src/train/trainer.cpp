#include "motionprior/train/trainer.hpp"

#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/canonical.hpp"
#include "motionprior/kin/rigid.hpp"
#include "motionprior/log.hpp"
#include "motionprior/train/losses.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace motionprior::train {

namespace fl = kin::feature_layout;
using diff::Tape;

void LossWeights::validate() const {
  require(w_kl >= 0.0 && w_contact >= 0.0, ErrorKind::Config, "loss weights must be non-negative");
}

void TrainSchedule::validate() const {
  require(epochs >= 0 && windows_per_epoch > 0 && batch > 0 && window >= 2 && val_windows > 0, ErrorKind::Config,
          "training schedule sizes must be positive (window >= 2)");
  require(lr >= 0.0, ErrorKind::Config, "learning rate must be non-negative");
  int last = -1;
  for (const auto& [e, v] : lr_stages) {
    require(e > last, ErrorKind::Config, "learning-rate stage boundaries must increase");
    require(v >= 0.0, ErrorKind::Config, "stage learning rates must be non-negative");
    last = e;
  }
  require(kl_anneal_epochs >= 0 && supervised_epochs >= 0 && mixed_epochs >= 0 && patience >= 0, ErrorKind::Config,
          "schedule spans must be non-negative");
}

double TrainSchedule::lr_at(int epoch) const {
  double out = lr;
  for (const auto& [e, v] : lr_stages)
    if (epoch >= e) out = v;
  return out;
}

double TrainSchedule::kl_weight_at(int epoch, double w_kl) const {
  if (kl_anneal_epochs <= 0) return w_kl;
  return w_kl * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(kl_anneal_epochs));
}

double TrainSchedule::truth_probability(int epoch) const {
  if (epoch < supervised_epochs) return 1.0;
  const int k = epoch - supervised_epochs;
  if (k < mixed_epochs) return 1.0 - static_cast<double>(k + 1) / static_cast<double>(mixed_epochs + 1);
  return 0.0;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = model::CvaeConfig::from_json(j.at("model"));
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      auto& d = c.schedule;
      d.epochs = s.value("epochs", d.epochs);
      d.windows_per_epoch = s.value("windows_per_epoch", d.windows_per_epoch);
      d.batch = s.value("batch", d.batch);
      d.window = s.value("window", d.window);
      d.val_windows = s.value("val_windows", d.val_windows);
      d.lr = s.value("lr", d.lr);
      if (s.contains("lr_stages")) {
        d.lr_stages.clear();
        for (const auto& st : s.at("lr_stages")) d.lr_stages.emplace_back(st.at(0).get<int>(), st.at(1).get<double>());
      }
      d.kl_anneal_epochs = s.value("kl_anneal_epochs", d.kl_anneal_epochs);
      d.supervised_epochs = s.value("supervised_epochs", d.supervised_epochs);
      d.mixed_epochs = s.value("mixed_epochs", d.mixed_epochs);
      d.patience = s.value("patience", d.patience);
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      auto& d = c.weights;
      d.w_kl = w.value("w_kl", d.w_kl);
      d.w_contact = w.value("w_contact", d.w_contact);
      d.joint = w.value("joint", d.joint);
      d.consist = w.value("consist", d.consist);
      d.marker = w.value("marker", d.marker);
      d.bce = w.value("bce", d.bce);
      d.vel = w.value("vel", d.vel);
    }
    c.seed = j.value("seed", c.seed);
    c.adamax_beta1 = j.value("adamax_beta1", c.adamax_beta1);
    c.adamax_beta2 = j.value("adamax_beta2", c.adamax_beta2);
    c.gmm_components = j.value("gmm_components", c.gmm_components);
    c.gmm_reg = j.value("gmm_reg", c.gmm_reg);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("training config: ") + e.what());
  }
  c.schedule.validate();
  c.weights.validate();
  require(c.gmm_components >= 1 && c.gmm_reg > 0.0, ErrorKind::Config, "gmm settings must be positive");
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& [e, v] : schedule.lr_stages) stages.push_back({e, v});
  return {{"model", model.to_json()},
          {"schedule",
           {{"epochs", schedule.epochs},
            {"windows_per_epoch", schedule.windows_per_epoch},
            {"batch", schedule.batch},
            {"window", schedule.window},
            {"val_windows", schedule.val_windows},
            {"lr", schedule.lr},
            {"lr_stages", stages},
            {"kl_anneal_epochs", schedule.kl_anneal_epochs},
            {"supervised_epochs", schedule.supervised_epochs},
            {"mixed_epochs", schedule.mixed_epochs},
            {"patience", schedule.patience}}},
          {"weights",
           {{"w_kl", weights.w_kl},
            {"w_contact", weights.w_contact},
            {"joint", weights.joint},
            {"consist", weights.consist},
            {"marker", weights.marker},
            {"bce", weights.bce},
            {"vel", weights.vel}}},
          {"seed", seed},
          {"adamax_beta1", adamax_beta1},
          {"adamax_beta2", adamax_beta2},
          {"gmm_components", gmm_components},
          {"gmm_reg", gmm_reg}};
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  rec += o.rec;
  kl += o.kl;
  joint += o.joint;
  consist += o.consist;
  marker += o.marker;
  bce += o.bce;
  vel += o.vel;
  total += o.total;
  contact_acc += o.contact_acc;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  LossBreakdown o = *this;
  o.rec *= s;
  o.kl *= s;
  o.joint *= s;
  o.consist *= s;
  o.marker *= s;
  o.bce *= s;
  o.vel *= s;
  o.total *= s;
  o.contact_acc *= s;
  return o;
}

WindowBatch sample_batch(const std::vector<data::MotionClip>& clips, std::mt19937_64& rng, int rows, int window) {
  WindowBatch b;
  b.beta.resize(rows, kin::kShapeDim);
  for (int i = 0; i < rows; ++i) {
    int ci = 0, st = 0;
    b.states.push_back(data::sample_training_window(clips, rng, window, &ci, &st));
    b.contacts.push_back(clips[ci].contacts.middleRows(st, window));
    b.beta.row(i) = clips[ci].shape.transpose();
  }
  return b;
}

std::pair<Mat, Mat> feature_statistics(const std::vector<data::MotionClip>& clips, double std_floor) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(fl::kSize), sq = Eigen::VectorXd::Zero(fl::kSize);
  double n = 0.0;
  for (const auto& c : clips)
    for (const auto& s : c.states) {
      const Eigen::VectorXd f = kin::canonicalize(s).first.to_features();
      sum += f;
      sq += f.cwiseProduct(f);
      n += 1.0;
    }
  require(n > 0.0, ErrorKind::Precondition, "feature_statistics: no frames");
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
  return {mean.transpose(), var.cwiseSqrt().cwiseMax(std_floor).transpose()};
}

namespace {

Mat rows_of(const std::vector<std::vector<kin::MotionState>>& s, int t) {
  Mat out(static_cast<Eigen::Index>(s.size()), fl::kSize);
  for (std::size_t i = 0; i < s.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = s[i][t].to_features().transpose();
  return out;
}

}  // namespace

LossBreakdown run_batch(const model::Cvae& m, const kin::Skeleton& skel, const WindowBatch& batch,
                        const LossWeights& w, double w_kl, double truth_prob, bool posterior_mean,
                        std::mt19937_64& rng, diff::Vec* grad) {
  const Eigen::Index b = static_cast<Eigen::Index>(batch.states.size());
  require(b > 0, ErrorKind::Precondition, "run_batch: empty batch");
  const int len = static_cast<int>(batch.states[0].size());
  require(len >= 2, ErrorKind::Precondition, "run_batch: windows need at least two frames");
  const int latent = m.config().latent;
  const auto& layout = kin::feature_rigid_layout();

  Tape tape;
  model::CvaeVars v = m.bind(tape, grad != nullptr);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;

  Mat pred_world;
  std::vector<Var> step_totals;
  LossBreakdown acc;
  double correct = 0.0;
  for (int t = 1; t < len; ++t) {
    Mat input = rows_of(batch.states, t - 1);
    if (t > 1 && truth_prob < 1.0)
      for (Eigen::Index i = 0; i < b; ++i)
        if (!(u01(rng) < truth_prob)) input.row(i) = pred_world.row(i);
    const Mat params = kin::canonical_params(input);
    const Mat prev_c = kin::rigid_apply(input, params, layout, false);
    const Mat truth_c = kin::rigid_apply(rows_of(batch.states, t), params, layout, false);
    Mat truth_state(b, kin::state_layout::kSize);
    Mat labels(b, kin::kContactCount);
    for (Eigen::Index i = 0; i < b; ++i) {
      truth_state.row(i) = kin::MotionState::from_features(truth_c.row(i).transpose()).to_vector().transpose();
      labels.row(i) = batch.contacts[i].row(t);
    }

    Var pc = tape.constant(prev_c);
    model::GaussianVars q = m.encode_op(v, tape.constant(truth_c), pc);
    model::GaussianVars p = m.prior_op(v, pc);
    Var z = q.mu;
    if (!posterior_mean) {
      Mat eps(b, latent);
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = n01(rng);
      z = diff::add(q.mu, diff::mul(diff::exp(q.log_sigma), tape.constant(eps)));
    }
    model::DecodeVars d = m.decode_op(v, z, pc);
    Var next_c = model::integrate_op(pc, d.delta);

    Var rec = reconstruction_loss_op(model::state_vector_op(next_c), truth_state);
    Var kl = kl_diag_op(q, p);
    RegularizerVars r = regularizer_losses(skel, next_c, d.logits, truth_c, labels, batch.beta);

    Var total = diff::add(rec, diff::scale(kl, w_kl));
    if (w.joint) total = diff::add(total, r.joint);
    if (w.consist) total = diff::add(total, r.consist);
    if (w.marker) total = diff::add(total, r.marker);
    if (w.bce) total = diff::add(total, diff::scale(r.bce, w.w_contact));
    if (w.vel) total = diff::add(total, diff::scale(r.vel, w.w_contact));
    step_totals.push_back(total);

    LossBreakdown s;
    s.rec = rec.value()(0, 0);
    s.kl = kl.value()(0, 0);
    s.joint = r.joint.value()(0, 0);
    s.consist = r.consist.value()(0, 0);
    s.marker = r.marker.value()(0, 0);
    s.bce = r.bce.value()(0, 0);
    s.vel = r.vel.value()(0, 0);
    s.total = total.value()(0, 0);
    acc += s;
    const Mat& lg = d.logits.value();
    for (Eigen::Index i = 0; i < lg.size(); ++i) correct += ((lg.data()[i] >= 0.0) == (labels.data()[i] > 0.5));

    pred_world = kin::rigid_apply(next_c.value(), params, layout, true);
  }
  const double steps = static_cast<double>(len - 1);
  LossBreakdown out = acc.scaled(1.0 / steps);
  out.contact_acc = correct / (steps * static_cast<double>(b) * kin::kContactCount);
  if (!std::isfinite(out.total)) throw Error(ErrorKind::Numeric, "non-finite training loss");
  if (grad) {
    Var total = step_totals[0];
    for (std::size_t i = 1; i < step_totals.size(); ++i) total = diff::add(total, step_totals[i]);
    total = diff::scale(total, 1.0 / steps);
    tape.backward(total);
    *grad = v.gradient(tape, m.params().size());
    if (!grad->allFinite()) throw Error(ErrorKind::Numeric, "non-finite training gradient");
  }
  return out;
}

LossBreakdown evaluate(const model::Cvae& m, const kin::Skeleton& skel, const WindowBatch& batch,
                       const LossWeights& w) {
  std::mt19937_64 unused(0);
  // evaluate in chunks to bound tape size
  const std::size_t chunk = 128;
  LossBreakdown acc;
  double rows = 0.0;
  for (std::size_t s = 0; s < batch.states.size(); s += chunk) {
    const std::size_t e = std::min(batch.states.size(), s + chunk);
    WindowBatch part;
    part.states.assign(batch.states.begin() + s, batch.states.begin() + e);
    part.contacts.assign(batch.contacts.begin() + s, batch.contacts.begin() + e);
    part.beta = batch.beta.middleRows(s, e - s);
    const double n = static_cast<double>(e - s);
    acc += run_batch(m, skel, part, w, w.w_kl, 1.0, true, unused, nullptr).scaled(n);
    rows += n;
  }
  return acc.scaled(1.0 / rows);
}

TrainResult train_cvae(model::Cvae& m, const kin::Skeleton& skel, const std::vector<data::MotionClip>& train,
                       const std::vector<data::MotionClip>& val, const TrainConfig& cfg, int start_epoch) {
  require(!train.empty(), ErrorKind::Precondition, "train_cvae: empty training split");
  require(!val.empty(), ErrorKind::Precondition, "train_cvae: empty validation split");
  const TrainSchedule& sc = cfg.schedule;
  sc.validate();
  cfg.weights.validate();

  std::mt19937_64 val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const WindowBatch val_batch = sample_batch(val, val_rng, sc.val_windows, sc.window);
  std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(start_epoch));

  diff::AdamaxState opt;
  diff::AdamaxOptions ao;
  ao.beta1 = cfg.adamax_beta1;
  ao.beta2 = cfg.adamax_beta2;

  TrainResult res;
  diff::Vec best = m.params().values();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const int batches = (sc.windows_per_epoch + sc.batch - 1) / sc.batch;
  for (int e = start_epoch; e < start_epoch + sc.epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.lr = sc.lr_at(e);
    rec.w_kl = sc.kl_weight_at(e, cfg.weights.w_kl);
    rec.truth_prob = sc.truth_probability(e);
    ao.lr = rec.lr;
    int remaining = sc.windows_per_epoch;
    for (int bi = 0; bi < batches; ++bi) {
      const int rows = std::min(sc.batch, remaining);
      remaining -= rows;
      const WindowBatch wb = sample_batch(train, rng, rows, sc.window);
      diff::Vec g;
      LossBreakdown l;
      try {
        l = run_batch(m, skel, wb, cfg.weights, rec.w_kl, rec.truth_prob, false, rng, &g);
      } catch (const Error& err) {
        throw Error(err.kind(), std::string(err.what()) + " (epoch " + std::to_string(e) + ", batch " +
                                    std::to_string(bi) + ")");
      }
      diff::adamax_step(m.params().values(), g, opt, ao);
      rec.train += l.scaled(static_cast<double>(rows) / sc.windows_per_epoch);
    }
    rec.val = evaluate(m, skel, val_batch, cfg.weights);
    log_info("epoch " + std::to_string(e) + ": train total " + std::to_string(rec.train.total) + ", val rec " +
             std::to_string(rec.val.rec) + ", val contact acc " + std::to_string(rec.val.contact_acc));
    res.curves.push_back(rec);
    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      best = m.params().values();
      res.best_epoch = e;
      since_best = 0;
    } else if (sc.patience > 0 && ++since_best >= sc.patience) {
      log_info("early stop at epoch " + std::to_string(e));
      break;
    }
  }
  if (res.best_epoch >= 0) m.params().values() = best;
  res.best_val = best_val;
  return res;
}

void write_curves_csv(const std::vector<EpochRecord>& curves, const std::string& path, bool append) {
  const bool header = !append || !std::ifstream(path).good();
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  auto cols = [](const std::string& p) {
    std::ostringstream s;
    for (const char* n : {"rec", "kl", "joint", "consist", "marker", "bce", "vel", "total", "contact_acc"})
      s << "," << p << "_" << n;
    return s.str();
  };
  if (header) out << "epoch,lr,w_kl,truth_prob" << cols("train") << cols("val") << "\n";
  auto vals = [](const LossBreakdown& l) {
    std::ostringstream s;
    s.precision(10);
    for (double v : {l.rec, l.kl, l.joint, l.consist, l.marker, l.bce, l.vel, l.total, l.contact_acc}) s << "," << v;
    return s.str();
  };
  for (const auto& r : curves)
    out << r.epoch << "," << r.lr << "," << r.w_kl << "," << r.truth_prob << vals(r.train) << vals(r.val) << "\n";
}

Eigen::MatrixXd init_state_data(const std::vector<data::MotionClip>& clips, int stride) {
  require(stride >= 1, ErrorKind::Precondition, "init_state_data: stride must be positive");
  std::vector<Eigen::VectorXd> rows;
  for (const auto& c : clips)
    for (int t = 0; t < c.frame_count(); t += stride) rows.push_back(gmm::init_vector(kin::canonicalize(c.states[t]).first));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), gmm::kInitDim);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

}  // namespace motionprior::train
