#include "motionprior/model/cvae.hpp"

#include "motionprior/data/container.hpp"
#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/geom_ops.hpp"
#include "motionprior/kin/rigid.hpp"

#include <cmath>
#include <numbers>

namespace motionprior::model {

namespace fl = kin::feature_layout;
namespace sl = kin::state_layout;
using diff::Tape;

void CvaeConfig::validate() const {
  require(latent > 0, ErrorKind::Config, "latent size must be positive");
  require(groups > 0, ErrorKind::Config, "group count must be positive");
  require(!encoder_hidden.empty() && !prior_hidden.empty() && !decoder_hidden.empty(), ErrorKind::Config,
          "every network needs at least one hidden layer");
  for (const auto* ws : {&encoder_hidden, &prior_hidden, &decoder_hidden})
    for (int w : *ws)
      require(w > 0 && w % groups == 0, ErrorKind::Config,
              "hidden width " + std::to_string(w) + " is not a positive multiple of " + std::to_string(groups));
  require(log_sigma_min < log_sigma_max, ErrorKind::Config, "log_sigma clamp range is empty");
}

nlohmann::json CvaeConfig::to_json() const {
  return {{"latent", latent},
          {"encoder_hidden", encoder_hidden},
          {"prior_hidden", prior_hidden},
          {"decoder_hidden", decoder_hidden},
          {"groups", groups},
          {"log_sigma_min", log_sigma_min},
          {"log_sigma_max", log_sigma_max}};
}

CvaeConfig CvaeConfig::from_json(const nlohmann::json& j) {
  CvaeConfig c;
  try {
    c.latent = j.value("latent", c.latent);
    c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
    c.prior_hidden = j.value("prior_hidden", c.prior_hidden);
    c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
    c.groups = j.value("groups", c.groups);
    c.log_sigma_min = j.value("log_sigma_min", c.log_sigma_min);
    c.log_sigma_max = j.value("log_sigma_max", c.log_sigma_max);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

// (name prefix, input width, hidden widths, output width, skip width)
void add_mlp(diff::ParamVector& p, const std::string& name, int in, const std::vector<int>& hidden, int out,
             int skip) {
  int prev = in;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const bool last = l == hidden.size();
    const int width = last ? out : hidden[l];
    const std::string pre = name + "." + std::to_string(l);
    p.add(pre + ".w", prev + skip, width);
    p.add(pre + ".b", 1, width);
    if (!last) {
      p.add(pre + ".gn_g", 1, width);
      p.add(pre + ".gn_b", 1, width);
    }
    prev = width;
  }
}

int layer_count(const diff::ParamVector& p, const std::string& name) {
  int n = 0;
  while (p.has(name + "." + std::to_string(n) + ".w")) ++n;
  return n;
}

}  // namespace

Cvae::Cvae(CvaeConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int f = fl::kSize;
  add_mlp(params_, "enc", 2 * f, cfg_.encoder_hidden, 2 * cfg_.latent, 0);
  add_mlp(params_, "pri", f, cfg_.prior_hidden, 2 * cfg_.latent, 0);
  add_mlp(params_, "dec", f, cfg_.decoder_hidden, kDecoderOut, cfg_.latent);
  in_mean_ = Mat::Zero(1, f);
  in_std_ = Mat::Ones(1, f);
  init_weights(seed);
}

void Cvae::set_input_stats(const Mat& mean, const Mat& std) {
  require(mean.rows() == 1 && mean.cols() == fl::kSize && std.rows() == 1 && std.cols() == fl::kSize,
          ErrorKind::DimensionMismatch, "input stats must be 1 x 339");
  require((std.array() > 0.0).all() && mean.allFinite() && std.allFinite(), ErrorKind::Numeric,
          "input stats must be finite with positive scales");
  in_mean_ = mean;
  in_std_ = std;
}

void Cvae::init_weights(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const std::string net : {"enc", "pri", "dec"}) {
    const int n = layer_count(params_, net);
    for (int l = 0; l < n; ++l) {
      const std::string pre = net + "." + std::to_string(l);
      auto w = params_.view(pre + ".w");
      auto b = params_.view(pre + ".b");
      if (l == n - 1) {
        w.setZero();
        b.setZero();
        continue;
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
      params_.view(pre + ".gn_g").setOnes();
      params_.view(pre + ".gn_b").setZero();
    }
  }
}

CvaeVars Cvae::bind(Tape& tape, bool trainable) const {
  CvaeVars v;
  auto make = [&](const std::string& name) {
    const diff::Segment& s = params_.segment(name);
    Var var = trainable ? tape.variable(params_.get(name)) : tape.constant(params_.get(name));
    if (trainable) v.bound.emplace_back(s.offset, var);
    return var;
  };
  auto bind_net = [&](const std::string& net, std::vector<CvaeVars::Layer>& out) {
    const int n = layer_count(params_, net);
    for (int l = 0; l < n; ++l) {
      const std::string pre = net + "." + std::to_string(l);
      CvaeVars::Layer layer;
      layer.w = make(pre + ".w");
      layer.b = make(pre + ".b");
      layer.norm = l + 1 < n;
      if (layer.norm) {
        layer.gamma = make(pre + ".gn_g");
        layer.beta = make(pre + ".gn_b");
      }
      out.push_back(layer);
    }
  };
  bind_net("enc", v.enc);
  bind_net("pri", v.pri);
  bind_net("dec", v.dec);
  v.in_mean = tape.constant(-in_mean_);
  v.in_scale = tape.constant(in_std_.cwiseInverse());
  return v;
}

diff::Vec CvaeVars::gradient(const Tape& tape, Eigen::Index size) const {
  diff::Vec g = diff::Vec::Zero(size);
  for (const auto& [offset, var] : bound) {
    const Mat gv = tape.grad(var);
    g.segment(offset, gv.size()) = Eigen::Map<const diff::Vec>(gv.data(), gv.size());
  }
  return g;
}

Var Cvae::run_mlp(const std::vector<CvaeVars::Layer>& layers, Var x, Var skip) const {
  Var h = x;
  for (const auto& layer : layers) {
    Var in = skip.valid() ? diff::concat_cols({h, skip}) : h;
    h = diff::linear(in, layer.w, layer.b);
    if (layer.norm) h = diff::relu(diff::group_norm(h, layer.gamma, layer.beta, cfg_.groups));
  }
  return h;
}

Var Cvae::normalize_input(const CvaeVars& v, Var feats) const {
  return diff::mul_row(diff::add_row(feats, v.in_mean), v.in_scale);
}

namespace {

void check_features(Var x, const char* what) {
  require(x.cols() == fl::kSize, ErrorKind::DimensionMismatch,
          std::string(what) + ": expected 339 feature columns, got " + std::to_string(x.cols()));
}

}  // namespace

GaussianVars Cvae::encode_op(const CvaeVars& v, Var x_canon, Var prev_canon) const {
  check_features(x_canon, "encode");
  check_features(prev_canon, "encode");
  Var in = diff::concat_cols({normalize_input(v, x_canon), normalize_input(v, prev_canon)});
  Var out = run_mlp(v.enc, in, Var());
  return {diff::slice_cols(out, 0, cfg_.latent),
          diff::clamp(diff::slice_cols(out, cfg_.latent, cfg_.latent), cfg_.log_sigma_min, cfg_.log_sigma_max)};
}

GaussianVars Cvae::prior_op(const CvaeVars& v, Var prev_canon) const {
  check_features(prev_canon, "prior");
  Var out = run_mlp(v.pri, normalize_input(v, prev_canon), Var());
  return {diff::slice_cols(out, 0, cfg_.latent),
          diff::clamp(diff::slice_cols(out, cfg_.latent, cfg_.latent), cfg_.log_sigma_min, cfg_.log_sigma_max)};
}

DecodeVars Cvae::decode_op(const CvaeVars& v, Var z, Var prev_canon) const {
  check_features(prev_canon, "decode");
  require(z.cols() == cfg_.latent, ErrorKind::DimensionMismatch, "decode: latent width");
  Var out = run_mlp(v.dec, normalize_input(v, prev_canon), z);
  return {diff::slice_cols(out, 0, kDeltaDim), diff::slice_cols(out, kDeltaDim, kin::kContactCount)};
}

StepVars Cvae::step_op(const CvaeVars& v, Var prev_world, Var z, bool with_prior) const {
  StepVars s;
  const auto& layout = kin::feature_rigid_layout();
  s.params = kin::canonical_params_op(prev_world);
  s.prev_canon = kin::rigid_transform_op(prev_world, s.params, layout, false);
  if (with_prior) s.prior = prior_op(v, s.prev_canon);
  s.out = decode_op(v, z, s.prev_canon);
  s.next_canon = integrate_op(s.prev_canon, s.out.delta);
  s.next_world = kin::rigid_transform_op(s.next_canon, s.params, layout, true);
  return s;
}

Var integrate_op(Var prev, Var delta) {
  require(prev.cols() == fl::kSize && delta.cols() == sl::kSize, ErrorKind::DimensionMismatch,
          "integrate: expected 339 features and 207 deltas");
  using diff::add;
  using diff::slice_cols;
  Var r = add(slice_cols(prev, fl::kR, 3), slice_cols(delta, sl::kR, 3));
  Var rd = add(slice_cols(prev, fl::kRDot, 3), slice_cols(delta, sl::kRDot, 3));
  Var root = kin::rotmat_mul_op(kin::rodrigues_op(slice_cols(delta, sl::kPhi, 3)), slice_cols(prev, fl::kRootRot, 9));
  Var om = add(slice_cols(prev, fl::kOmega, 3), slice_cols(delta, sl::kPhiDot, 3));
  Var pose = kin::rotmat_mul_op(kin::rodrigues_op(slice_cols(delta, sl::kTheta, 3 * kin::kBoneCount)),
                                slice_cols(prev, fl::kPoseRot, 9 * kin::kBoneCount));
  Var j = add(slice_cols(prev, fl::kJoints, 3 * kin::kJointCount), slice_cols(delta, sl::kJoints, 3 * kin::kJointCount));
  Var jd = add(slice_cols(prev, fl::kJointsDot, 3 * kin::kJointCount),
               slice_cols(delta, sl::kJointsDot, 3 * kin::kJointCount));
  return diff::concat_cols({r, rd, root, om, pose, j, jd});
}

Var state_vector_op(Var f) {
  require(f.cols() == fl::kSize, ErrorKind::DimensionMismatch, "state_vector: expected 339 features");
  using diff::slice_cols;
  return diff::concat_cols({slice_cols(f, fl::kR, 6), kin::rotation_log_op(slice_cols(f, fl::kRootRot, 9)),
                            slice_cols(f, fl::kOmega, 3),
                            kin::rotation_log_op(slice_cols(f, fl::kPoseRot, 9 * kin::kBoneCount)),
                            slice_cols(f, fl::kJoints, 6 * kin::kJointCount)});
}

Var gaussian_log_density_op(Var z, const GaussianVars& g) {
  const double c = -0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(z.cols());
  Var u = diff::mul(diff::sub(z, g.mu), diff::exp(diff::scale(g.log_sigma, -1.0)));
  Var q = diff::add(diff::scale(diff::square(u), -0.5), diff::scale(g.log_sigma, -1.0));
  return diff::add_scalar(diff::sum_cols(q), c);
}

namespace {

Gaussian to_gaussian(const GaussianVars& g) {
  return {g.mu.value().row(0).transpose(), g.log_sigma.value().row(0).transpose()};
}

Mat feature_row(const kin::MotionState& s) { return s.to_features().transpose(); }

}  // namespace

Gaussian Cvae::encode(const kin::MotionState& x_t, const kin::MotionState& x_prev) const {
  Tape tape;
  CvaeVars v = bind(tape, false);
  const Mat prev = feature_row(x_prev);
  const Mat params = kin::canonical_params(prev);
  const auto& layout = kin::feature_rigid_layout();
  Var pc = tape.constant(kin::rigid_apply(prev, params, layout, false));
  Var xc = tape.constant(kin::rigid_apply(feature_row(x_t), params, layout, false));
  return to_gaussian(encode_op(v, xc, pc));
}

Gaussian Cvae::prior(const kin::MotionState& x_prev) const {
  Tape tape;
  CvaeVars v = bind(tape, false);
  const Mat prev = feature_row(x_prev);
  Var pc = tape.constant(kin::rigid_apply(prev, kin::canonical_params(prev), kin::feature_rigid_layout(), false));
  return to_gaussian(prior_op(v, pc));
}

DecoderOutput Cvae::decode(const Eigen::VectorXd& z, const kin::MotionState& x_prev) const {
  require(z.size() == cfg_.latent, ErrorKind::DimensionMismatch, "decode: latent width");
  Tape tape;
  CvaeVars v = bind(tape, false);
  StepVars s = step_op(v, tape.constant(feature_row(x_prev)), tape.constant(z.transpose()), false);
  DecoderOutput out;
  out.delta = s.out.delta.value().row(0).transpose();
  out.contact_probs = diff::sigmoid(s.out.logits).value().row(0).transpose();
  out.next = kin::MotionState::from_features(s.next_world.value().row(0).transpose());
  return out;
}

Transition Cvae::sample_transition(const kin::MotionState& x_prev, std::mt19937_64& rng) const {
  const Gaussian p = prior(x_prev);
  std::normal_distribution<double> n01;
  Eigen::VectorXd z(cfg_.latent);
  for (int i = 0; i < cfg_.latent; ++i) z[i] = p.mu[i] + std::exp(p.log_sigma[i]) * n01(rng);
  DecoderOutput d = decode(z, x_prev);
  return {std::move(d.next), std::move(d.contact_probs), std::move(z)};
}

std::vector<kin::MotionState> Cvae::rollout(const kin::MotionState& x0, const Eigen::MatrixXd& z_seq,
                                            Eigen::MatrixXd* contacts) const {
  require(z_seq.rows() == 0 || z_seq.cols() == cfg_.latent, ErrorKind::DimensionMismatch,
          "rollout: latent sequence must have 48 columns");
  std::vector<kin::MotionState> out;
  if (contacts) contacts->resize(z_seq.rows(), kin::kContactCount);
  Mat prev = feature_row(x0);
  for (Eigen::Index t = 0; t < z_seq.rows(); ++t) {
    Tape tape;
    CvaeVars v = bind(tape, false);
    StepVars s = step_op(v, tape.constant(prev), tape.constant(z_seq.row(t)), false);
    prev = s.next_world.value();
    if (!prev.allFinite())
      throw Error(ErrorKind::Divergence, "rollout produced a non-finite state at step " + std::to_string(t + 1));
    out.push_back(kin::MotionState::from_features(prev.row(0).transpose()));
    if (contacts) contacts->row(t) = diff::sigmoid(s.out.logits).value().row(0);
  }
  return out;
}

void save_checkpoint(const Cvae& model, const std::string& path) {
  data::Container c;
  c.magic = kCheckpointMagic;
  c.version = kCheckpointVersion;
  c.type = data::PayloadType::Float32;
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : model.params().segments()) segs.push_back({s.name, s.rows, s.cols});
  c.meta = {{"config", model.config().to_json()},
            {"skeleton_hash", model.skeleton_hash},
            {"train", model.train_meta},
            {"segments", segs},
            {"input_stats", kin::feature_layout::kSize}};
  const auto& v = model.params().values();
  c.f32.reserve(v.size() + 2 * fl::kSize);
  for (Eigen::Index i = 0; i < v.size(); ++i) c.f32.push_back(static_cast<float>(v[i]));
  for (Eigen::Index i = 0; i < fl::kSize; ++i) c.f32.push_back(static_cast<float>(model.input_mean()(0, i)));
  for (Eigen::Index i = 0; i < fl::kSize; ++i) c.f32.push_back(static_cast<float>(model.input_std()(0, i)));
  data::write_container(path, c);
}

Cvae load_checkpoint(const std::string& path) {
  const data::Container c = data::read_container(path, kCheckpointMagic, kCheckpointVersion);
  require(c.type == data::PayloadType::Float32, ErrorKind::Format, path + ": checkpoint payload must be float32");
  Cvae m(CvaeConfig::from_json(c.meta.at("config")));
  const auto& segs = c.meta.at("segments");
  require(segs.size() == m.params().segments().size(), ErrorKind::Format, path + ": segment table mismatch");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = m.params().segments()[i];
    require(segs[i][0].get<std::string>() == s.name && segs[i][1].get<Eigen::Index>() == s.rows &&
                segs[i][2].get<Eigen::Index>() == s.cols,
            ErrorKind::Format, path + ": segment '" + s.name + "' does not match the architecture");
  }
  const Eigen::Index n = m.params().size();
  require(c.f32.size() == static_cast<std::size_t>(n + 2 * fl::kSize), ErrorKind::LengthMismatch,
          path + ": parameter payload length");
  for (Eigen::Index i = 0; i < n; ++i) m.params().values()[i] = c.f32[i];
  Mat mean(1, fl::kSize), sd(1, fl::kSize);
  for (Eigen::Index i = 0; i < fl::kSize; ++i) {
    mean(0, i) = c.f32[n + i];
    sd(0, i) = c.f32[n + fl::kSize + i];
  }
  m.set_input_stats(mean, sd);
  m.skeleton_hash = c.meta.value("skeleton_hash", "");
  m.train_meta = c.meta.value("train", nlohmann::json::object());
  return m;
}

}  // namespace motionprior::model
