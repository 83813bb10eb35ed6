#include "motionprior/fit/fit.hpp"

#include "motionprior/diff/ops.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/kin/geom_ops.hpp"
#include "motionprior/kin/motion.hpp"
#include "motionprior/kin/rigid.hpp"
#include "motionprior/kin/rotation.hpp"
#include "motionprior/log.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace motionprior::fit {

namespace fl = kin::feature_layout;

void FitOptions::validate() const {
  for (int s : stages) require(s >= 0, ErrorKind::Config, "stage iteration counts must be non-negative");
  for (int s : init_stages) require(s >= 0, ErrorKind::Config, "initialization iteration counts must be non-negative");
  require(stage1_frames >= 1, ErrorKind::Config, "stage1_frames must be >= 1");
  require(history >= 1, ErrorKind::Config, "L-BFGS history must be >= 1");
  require(track_iters >= 0, ErrorKind::Config, "track_iters must be non-negative");
}

nlohmann::json FitOptions::to_json() const {
  return {{"stages", stages}, {"stage1_frames", stage1_frames}, {"init_stages", init_stages}, {"history", history}, {"track_iters", track_iters}};
}

FitOptions FitOptions::from_json(const nlohmann::json& j) {
  FitOptions o;
  if (j.contains("stages")) {
    const auto s = j.at("stages").get<std::vector<int>>();
    require(s.size() == 3, ErrorKind::Config, "stages needs three iteration counts");
    o.stages = {s[0], s[1], s[2]};
  }
  if (j.contains("init_stages")) {
    const auto s = j.at("init_stages").get<std::vector<int>>();
    require(s.size() == 2, ErrorKind::Config, "init_stages needs two iteration counts");
    o.init_stages = {s[0], s[1]};
  }
  o.stage1_frames = j.value("stage1_frames", o.stage1_frames);
  o.history = j.value("history", o.history);
  o.track_iters = j.value("track_iters", o.track_iters);
  o.validate();
  return o;
}

namespace {

using Index = Eigen::Index;

bool labelled_3d(ObsKind k) { return k == ObsKind::Joints3D || k == ObsKind::Keypoints3D; }

// Rest-pose template points matching the observation rows (joints or markers).
Eigen::MatrixXd template_points(const kin::Skeleton& skel, ObsKind kind) {
  const kin::FkOutput rest = kin::forward_kinematics(skel, Eigen::VectorXd::Zero(kin::kShapeDim), Eigen::Vector3d::Zero(),
                                                     Eigen::Vector3d::Zero(), kin::PoseMat::Zero());
  if (kind == ObsKind::Keypoints3D) return rest.markers;
  if (kind == ObsKind::PointCloud) {
    Eigen::MatrixXd all(kin::kJointCount + rest.markers.rows(), 3);
    all << Eigen::MatrixXd(rest.joints), rest.markers;
    return all;
  }
  return rest.joints;
}


void split_row(const Mat& p, Eigen::Matrix3d& q, Eigen::Vector3d& t) {
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) q(a, b) = p(0, 3 * a + b);
  t = Eigen::Vector3d(p(0, 9), p(0, 10), p(0, 11));
}

Mat ground_row(const Eigen::Vector3d& g_ref) { return kin::ground_params(g_ref, Eigen::Vector3d::UnitZ()); }

// Ground-frame feature rows -> observation-frame states.
std::vector<kin::MotionState> ground_to_observation(const Mat& feats, const Mat& ground, const ReferenceFrame& ref) {
  const auto& layout = kin::feature_rigid_layout();
  const Mat in_ref = kin::rigid_apply(feats, ground, layout, true);
  const Mat in_obs = kin::rigid_apply(in_ref, ref.params(), layout, true);
  std::vector<kin::MotionState> out;
  out.reserve(static_cast<std::size_t>(in_obs.rows()));
  for (Index i = 0; i < in_obs.rows(); ++i) out.push_back(kin::MotionState::from_features(in_obs.row(i).transpose()));
  return out;
}

diff::LbfgsResult minimize_subset(const diff::DiffFunction& f, Vec& x, const std::vector<Index>& active, int iters,
                                  int history) {
  const Vec base = x;
  const Index n = static_cast<Index>(active.size());
  diff::DiffFunction sub = [&](const Vec& y, Vec* g) {
    Vec full = base;
    for (Index k = 0; k < n; ++k) full[active[k]] = y[k];
    Vec gf;
    const double v = f(full, g ? &gf : nullptr);
    if (g) {
      g->resize(n);
      for (Index k = 0; k < n; ++k) (*g)[k] = gf[active[k]];
    }
    return v;
  };
  Vec y(n);
  for (Index k = 0; k < n; ++k) y[k] = x[active[k]];
  diff::LbfgsOptions o;
  o.max_iters = iters;
  o.history = history;
  diff::LbfgsResult res = diff::lbfgs_minimize(sub, y, o);
  for (Index k = 0; k < n; ++k) x[active[k]] = res.x[k];
  return res;
}

std::vector<Index> range(Index a, Index b) {
  std::vector<Index> v;
  for (Index i = a; i < b; ++i) v.push_back(i);
  return v;
}

}  // namespace

ReferenceFrame choose_reference_frame(const Observation& obs, const Camera& cam, const kin::Skeleton& skel,
                                      const kin::GroundPlane& g_init) {
  obs.validate(skel);
  ReferenceFrame ref;
  if (labelled_3d(obs.kind)) {
    const Eigen::MatrixXd tmpl = template_points(skel, obs.kind);
    const Eigen::MatrixXd& p = obs.points[0];
    Eigen::Vector3d co = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
    double n = 0.0;
    for (Index i = 0; i < p.rows(); ++i)
      if (obs.weight(0, static_cast<int>(i)) > 0.0) {
        co += p.row(i).transpose();
        ct += tmpl.row(i).transpose();
        n += 1.0;
      }
    co /= n;
    ct /= n;
    // 2D Procrustes of the template onto the observation about +z
    double sc = 0.0, ss = 0.0;
    for (Index i = 0; i < p.rows(); ++i)
      if (obs.weight(0, static_cast<int>(i)) > 0.0) {
        const double tx = tmpl(i, 0) - ct.x(), ty = tmpl(i, 1) - ct.y();
        const double ox = p(i, 0) - co.x(), oy = p(i, 1) - co.y();
        sc += tx * ox + ty * oy;
        ss += tx * oy - ty * ox;
      }
    ref.yaw = (sc == 0.0 && ss == 0.0) ? 0.0 : std::atan2(ss, sc);
    ref.origin = co;
  } else if (obs.kind == ObsKind::PointCloud) {
    ref.origin = obs.points[0].colwise().mean().transpose();
  } else {
    // 2D: a point one meter above the initial floor, below the camera centre
    Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
    double d = 0.0;
    if (!g_init.is_default()) g_init.decompose(Eigen::Vector3d::UnitZ(), n, d);
    const Eigen::Vector3d centre = -cam.rotation.transpose() * cam.translation;
    const Eigen::Vector3d foot = centre - (n.dot(centre) + d) * n;
    ref.origin = foot + n;
  }
  // reject origins on the ground plane early
  (void)ref.plane_to_ref(g_init);
  return ref;
}

namespace {

// Latents for a rollout that follows the per-frame fit. Each z_t starts at the
// encoder mean against the rolled-out previous state and is refined by a short
// L-BFGS on the next state's joints (FK and regressed) plus the prior term.
Eigen::MatrixXd track_latents(const model::Cvae& model, const kin::Skeleton& skel,
                              const std::vector<kin::MotionState>& targets, const kin::MotionState& x0,
                              const Eigen::VectorXd& beta, const EnergyWeights& w, const FitOptions& opts) {
  const int steps = static_cast<int>(targets.size()) - 1;
  const int latent = model.config().latent;
  Eigen::MatrixXd z_seq(steps, latent);
  kin::MotionState first = x0;
  kin::refresh_joints(skel, beta, first);
  Mat prev = first.to_features().transpose();
  const Mat bmat = beta.transpose();
  for (int t = 0; t < steps; ++t) {
    const kin::MotionState prev_state = kin::MotionState::from_features(prev.row(0).transpose());
    Vec z = model.encode(targets[t + 1], prev_state).mu;
    const Mat target = Eigen::Map<const Mat>(targets[t + 1].joints.data(), 1, 3 * kin::kJointCount).eval();
    Mat next = prev;
    auto rollout = [&](const Vec& zv, Vec* g, Mat* next_out) {
      using namespace diff;
      Tape tape;
      const model::CvaeVars mv = model.bind(tape, false);
      Var zvar = g ? tape.variable(Mat(zv.transpose())) : tape.constant(Mat(zv.transpose()));
      const model::StepVars s = model.step_op(mv, tape.constant(prev), zvar, w.cvae > 0.0);
      if (next_out) *next_out = s.next_world.value();
      const kin::FkVars fk = kin::fk_op(skel, slice_cols(s.next_world, fl::kR, 3), slice_cols(s.next_world, fl::kRootRot, 9),
                                        slice_cols(s.next_world, fl::kPoseRot, 9 * kin::kBoneCount),
                                        tape.constant(bmat), kernels::Exec::Serial);
      Var tgt = tape.constant(target);
      std::vector<Var> terms{sum(square(sub(fk.joints, tgt))),
                             sum(square(sub(slice_cols(s.next_world, fl::kJoints, 3 * kin::kJointCount), tgt)))};
      if (w.cvae > 0.0) terms.push_back(scale(sum(model::gaussian_log_density_op(zvar, s.prior)), -w.cvae));
      Var total = terms[0];
      for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
      const double f = total.value()(0, 0);
      if (g) {
        if (!std::isfinite(f)) {
          *g = Vec::Zero(zv.size());
          return f;
        }
        tape.backward(total);
        *g = tape.grad(zvar).transpose();
      }
      return f;
    };
    if (opts.track_iters > 0) {
      diff::LbfgsOptions lo;
      lo.max_iters = opts.track_iters;
      lo.history = opts.history;
      try {
        z = diff::lbfgs_minimize([&](const Vec& v, Vec* g) { return rollout(v, g, nullptr); }, z, lo).x;
      } catch (const Error& e) {
        if (!e.is_numeric()) throw;  // keep the encoder mean
      }
    }
    rollout(z, nullptr, &next);
    z_seq.row(t) = z.transpose();
    prev = next;
  }
  return z_seq;
}

}  // namespace

InitResult initialize_fit(const Observation& obs, const Camera& cam, const kin::Skeleton& skel, const EnergyWeights& w,
                          const kin::GroundPlane& g_init, const model::Cvae* model, const FitOptions& opts) {
  opts.validate();
  w.validate();
  obs.validate(skel);
  bool later = false;
  for (int t = 1; t < obs.frame_count(); ++t) later = later || obs.frame_has_data(t, w.min_confidence);
  require(later, ErrorKind::Precondition, "initialize_fit: every observation after frame 0 is missing");

  const ReferenceFrame ref = choose_reference_frame(obs, cam, skel, g_init);
  const DataTerm data(obs, cam, ref, w, skel, opts.exec);
  const InitEnergy energy(skel, data, w, opts.exec);
  const int f = obs.frame_count();
  const Eigen::MatrixXd tmpl = template_points(skel, obs.kind);

  // per-frame centroids of the data and of the matching template points
  std::vector<Eigen::Vector3d> c_obs(f), c_tmpl(f);
  std::vector<char> has(f, 0);
  Eigen::Matrix3d rc;
  Eigen::Vector3d tc;
  if (obs.kind == ObsKind::Joints2D) split_row(data.camera_params(), rc, tc);
  for (int t = 0; t < f; ++t) {
    if (!obs.frame_has_data(t, w.min_confidence)) continue;
    has[t] = 1;
    if (obs.kind == ObsKind::PointCloud) {
      c_obs[t] = data.ref_points(t).colwise().mean().transpose();
      c_tmpl[t] = tmpl.colwise().mean().transpose();
      continue;
    }
    Eigen::Vector3d ct = Eigen::Vector3d::Zero();
    Eigen::Vector2d uv = Eigen::Vector2d::Zero();
    double n = 0.0, vmin = 1e300, vmax = -1e300, zmin = 1e300, zmax = -1e300;
    Eigen::Vector3d co = Eigen::Vector3d::Zero();
    for (Index i = 0; i < tmpl.rows(); ++i) {
      if (data.ref_weights(t)[i] <= 0.0) continue;
      ct += tmpl.row(i).transpose();
      zmin = std::min(zmin, tmpl(i, 2));
      zmax = std::max(zmax, tmpl(i, 2));
      if (obs.kind == ObsKind::Joints2D) {
        uv += obs.points[t].row(i).transpose();
        vmin = std::min(vmin, obs.points[t](i, 1));
        vmax = std::max(vmax, obs.points[t](i, 1));
      } else {
        co += data.ref_points(t).row(i).transpose();
      }
      n += 1.0;
    }
    c_tmpl[t] = ct / n;
    if (obs.kind == ObsKind::Joints2D) {
      uv /= n;
      const double height = std::max(zmax - zmin, 0.3);
      const double depth = cam.fy * height / std::max(vmax - vmin, 1.0);
      const Eigen::Vector3d pc((uv.x() - cam.cx) * depth / cam.fx, (uv.y() - cam.cy) * depth / cam.fy, depth);
      c_obs[t] = rc.transpose() * (pc - tc);
    } else {
      c_obs[t] = co / n;
    }
  }
  for (int t = 1; t < f; ++t)
    if (!has[t]) {
      c_obs[t] = c_obs[t - 1];
      c_tmpl[t] = c_tmpl[t - 1];
    }

  const diff::DiffFunction fn = [&](const Vec& x, Vec* g) { return energy.evaluate(x, g); };
  std::vector<double> yaws{0.0};
  if (!labelled_3d(obs.kind)) yaws = {0.0, 0.5 * std::numbers::pi, std::numbers::pi, -0.5 * std::numbers::pi};
  const std::vector<Index> root_idx = range(0, 6 * static_cast<Index>(f));
  Vec best;
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<double> best_trace;
  for (double yaw : yaws) {
    Vec x = Vec::Zero(energy.size());
    const Eigen::Matrix3d rz = kin::rot_z(yaw);
    for (int t = 0; t < f; ++t) {
      x.segment<3>(3 * t) = c_obs[t] - rz * c_tmpl[t];
      x[energy.phi_offset() + 3 * t + 2] = yaw;
    }
    std::vector<double> trace{fn(x, nullptr)};
    if (opts.init_stages[0] > 0) {
      const diff::LbfgsResult r = minimize_subset(fn, x, root_idx, opts.init_stages[0], opts.history);
      trace.insert(trace.end(), r.trace.begin() + 1, r.trace.end());
    }
    if (trace.back() < best_f) {
      best_f = trace.back();
      best = x;
      best_trace = trace;
    }
  }
  Vec x = best;
  InitResult res;
  res.trace = best_trace;
  if (opts.init_stages[1] > 0) {
    const diff::LbfgsResult r = minimize_subset(fn, x, range(0, energy.size()), opts.init_stages[1], opts.history);
    res.trace.insert(res.trace.end(), r.trace.begin() + 1, r.trace.end());
  }
  energy.evaluate(x, nullptr, &res.energy);

  const Eigen::VectorXd beta = x.segment(energy.beta_offset(), kin::kShapeDim);
  const Eigen::Vector3d g_ref = snap_to_grid(ref.plane_to_ref(g_init));
  Eigen::Matrix3d qw, qr = ref.rotation();
  Eigen::Vector3d tw;
  split_row(ground_row(g_ref), qw, tw);
  const double h = 1.0 / obs.frame_rate;
  for (int t = 0; t < f; ++t) {
    const Eigen::Vector3d r = x.segment<3>(3 * t);
    const Eigen::Matrix3d rot = kin::rodrigues(Eigen::Vector3d(x.segment<3>(energy.phi_offset() + 3 * t)));
    kin::MotionState so, sg;
    for (int b = 0; b < kin::kBoneCount; ++b)
      so.theta.row(b) = x.segment<3>(energy.theta_offset() + 3 * (kin::kBoneCount * t + b)).transpose();
    sg.theta = so.theta;
    so.r = qr.transpose() * r + ref.origin;
    so.phi = kin::rotation_log(qr.transpose() * rot);
    sg.r = qw * r + tw;
    sg.phi = kin::rotation_log(qw * rot);
    kin::refresh_joints(skel, beta, so);
    kin::refresh_joints(skel, beta, sg);
    res.states.push_back(so);
    res.ground_states.push_back(sg);
  }
  kin::fill_velocities(res.states, h);
  kin::fill_velocities(res.ground_states, h);

  res.vars.x0 = res.ground_states[0];
  res.vars.g = g_ref;
  res.vars.beta = beta;
  res.vars.ref = ref;
  if (model) {
    const int latent = model->config().latent;
    res.vars.z_seq.resize(f - 1, latent);
    res.vars.z_seq = track_latents(*model, skel, res.ground_states, res.vars.x0, beta, w, opts);
  }
  return res;
}

FitVariables make_variables(const kin::MotionState& x0_obs, const Eigen::MatrixXd& z_seq, const Eigen::VectorXd& beta,
                            const ReferenceFrame& ref, const kin::GroundPlane& g_obs) {
  FitVariables v;
  v.ref = ref;
  v.g = ref.plane_to_ref(g_obs);
  v.beta = beta;
  v.z_seq = z_seq;
  const auto& layout = kin::feature_rigid_layout();
  Mat f = x0_obs.to_features().transpose();
  f = kin::rigid_apply(f, ref.params(), layout, false);
  f = kin::rigid_apply(f, ground_row(v.g), layout, false);
  v.x0 = kin::MotionState::from_features(f.row(0).transpose());
  return v;
}

std::vector<kin::MotionState> rollout_states(const model::Cvae& model, const kin::Skeleton& skel, const FitVariables& v,
                                             Eigen::MatrixXd* contacts) {
  kin::MotionState x0 = v.x0;
  kin::refresh_joints(skel, v.beta, x0);
  std::vector<kin::MotionState> seq{x0};
  const auto rest = model.rollout(x0, v.z_seq, contacts);
  seq.insert(seq.end(), rest.begin(), rest.end());
  for (auto& s : seq) kin::refresh_joints(skel, v.beta, s);
  return ground_to_observation(kin::states_to_features(seq), ground_row(v.g), v.ref);
}

FitResult fit_from(const model::Cvae& model, const gmm::InitGmm& gmm, const Observation& obs, const Camera& cam,
                   const kin::Skeleton& skel, const EnergyWeights& w, const kin::GroundPlane& g_init,
                   const FitVariables& start, const FitOptions& opts) {
  opts.validate();
  const int steps = obs.frame_count() - 1;
  require(start.z_seq.rows() == steps, ErrorKind::LengthMismatch, "fit: latent count must equal frames - 1");
  const DataTerm data(obs, cam, start.ref, w, skel, opts.exec);
  const Eigen::Vector3d g_init_ref = snap_to_grid(start.ref.plane_to_ref(g_init));
  const FitEnergy energy(model, gmm, skel, data, w, g_init_ref, steps, opts.exec);
  const diff::DiffFunction fn = [&](const Vec& x, Vec* g) { return energy.evaluate(x, g); };

  Vec x = energy.pack(start);
  FitResult res;
  res.init_energy = fn(x, nullptr);
  require(std::isfinite(res.init_energy), ErrorKind::Divergence, "fit: energy at the starting point is not finite");
  res.energy_trace.push_back(res.init_energy);

  const Index zo = energy.z_offset(), go = energy.g_offset(), n = energy.size();
  const Index l = energy.latent();
  const Index early = std::min<Index>(opts.stage1_frames, steps);
  std::vector<std::vector<Index>> active(3);
  active[0] = range(0, FitEnergy::kX0Size);
  for (Index i : range(zo, zo + early * l)) active[0].push_back(i);
  active[1] = range(zo, zo + steps * l);
  for (Index i : range(go, n)) {
    active[0].push_back(i);
    active[1].push_back(i);
  }
  active[2] = range(0, n);

  for (int s = 0; s < 3; ++s) {
    if (opts.stages[s] > 0) {
      try {
        const diff::LbfgsResult r = minimize_subset(fn, x, active[s], opts.stages[s], opts.history);
        res.energy_trace.insert(res.energy_trace.end(), r.trace.begin() + 1, r.trace.end());
      } catch (const Error& e) {
        if (!e.is_numeric()) throw;
        log_warn(std::string("fit: stage ") + std::to_string(s + 1) + " failed, keeping best iterate: " + e.what());
        res.diverged = true;
      }
    }
    res.stage_ends.push_back(static_cast<int>(res.energy_trace.size()) - 1);
    if (res.diverged) break;
  }
  while (res.stage_ends.size() < 3) res.stage_ends.push_back(static_cast<int>(res.energy_trace.size()) - 1);

  RolloutOutputs out;
  res.final_energy = energy.evaluate(x, nullptr, &res.breakdown, &out);
  res.vars = start;
  energy.unpack(x, res.vars);
  Mat feats = out.features;
  feats.middleCols(fl::kJoints, 3 * kin::kJointCount) = out.fk_joints;
  res.states = ground_to_observation(feats, out.ground, start.ref);
  res.contacts.resize(steps + 1, kin::kContactCount);
  res.contacts.bottomRows(steps) = out.contacts;
  res.contacts.row(0) = out.contacts.row(0);
  res.ground = start.ref.plane_from_ref(res.vars.g);
  res.beta = res.vars.beta;
  return res;
}

FitResult fit(const model::Cvae& model, const gmm::InitGmm& gmm, const Observation& obs, const Camera& cam,
              const kin::Skeleton& skel, const EnergyWeights& w, const kin::GroundPlane& g_init, const FitOptions& opts,
              InitResult* init_out) {
  InitResult init = initialize_fit(obs, cam, skel, w, g_init, &model, opts);
  FitResult res;
  try {
    res = fit_from(model, gmm, obs, cam, skel, w, g_init, init.vars, opts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Divergence) throw;
    log_warn(std::string("fit: rollout from the initialization diverged, returning it: ") + e.what());
    res.states = init.states;
    res.contacts = Eigen::MatrixXd::Zero(obs.frame_count(), kin::kContactCount);
    res.ground = g_init;
    res.beta = init.vars.beta;
    res.vars = init.vars;
    res.diverged = true;
    res.init_energy = res.final_energy = std::numeric_limits<double>::infinity();
    res.stage_ends = {0, 0, 0};
  }
  if (init_out) *init_out = std::move(init);
  return res;
}

// ---------------------------------------------------------------- files

FitProblem FitProblem::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": " + e.what());
  }
  FitProblem p;
  try {
    const auto& o = j.at("observation");
    if (o.is_string()) {
      std::filesystem::path op(o.get<std::string>());
      if (op.is_relative()) op = std::filesystem::path(path).parent_path() / op;
      p.obs = load_observation(op.string());
    } else {
      p.obs = Observation::from_json(o);
    }
    if (j.contains("camera")) p.camera = Camera::from_json(j.at("camera"));
    p.weights = j.contains("weights") ? EnergyWeights::from_json(j.at("weights")) : EnergyWeights{};
    if (j.contains("g_init")) {
      const auto g = j.at("g_init").get<std::vector<double>>();
      require(g.size() == 3, ErrorKind::Config, "g_init needs 3 values");
      p.g_init.g = Eigen::Vector3d(g[0], g[1], g[2]);
    }
    p.options = FitOptions::from_json(j);
    p.skeleton_hash = j.value("skeleton_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  return p;
}

void FitProblem::save(const std::string& path, const std::string& obs_file) const {
  nlohmann::json j = options.to_json();
  if (obs_file.empty()) {
    j["observation"] = obs.to_json();
  } else {
    save_observation(obs, (std::filesystem::path(path).parent_path() / obs_file).string());
    j["observation"] = obs_file;
  }
  j["camera"] = camera.to_json();
  j["weights"] = weights.to_json();
  j["g_init"] = {g_init.g.x(), g_init.g.y(), g_init.g.z()};
  if (!skeleton_hash.empty()) j["skeleton_hash"] = skeleton_hash;
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << j.dump(2);
}

namespace {

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << j.dump(2);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Index k = 0; k < m.cols(); ++k) r[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(r);
  }
  return rows;
}

void write_states(const std::vector<kin::MotionState>& states, const Eigen::MatrixXd& probs, const Eigen::VectorXd& beta,
                  const std::string& path, const std::string& hash, double frame_rate, const std::string& name) {
  data::MotionClip clip;
  clip.name = name;
  clip.frame_rate = frame_rate;
  clip.states = states;
  clip.contacts = (probs.array() >= 0.5).cast<double>();
  clip.shape = beta;
  clip.generator = name;
  data::save_clip(clip, path, hash);
}

}  // namespace

void write_fit_result(const FitResult& r, const std::string& motion_path, const std::string& sidecar_path,
                      const std::string& skeleton_hash, double frame_rate, const std::string& name) {
  write_states(r.states, r.contacts, r.beta, motion_path, skeleton_hash, frame_rate, name);
  write_json({{"ground", {r.ground.g.x(), r.ground.g.y(), r.ground.g.z()}},
              {"beta", std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size())},
              {"energy_trace", r.energy_trace},
              {"stage_ends", r.stage_ends},
              {"init_energy", r.init_energy},
              {"final_energy", r.final_energy},
              {"energy", r.breakdown.to_json()},
              {"diverged", r.diverged},
              {"reference_frame", r.vars.ref.to_json()},
              {"contact_probs", matrix_rows(r.contacts)}},
             sidecar_path);
}

void write_init_result(const InitResult& r, const std::string& motion_path, const std::string& sidecar_path,
                       const std::string& skeleton_hash, double frame_rate, const std::string& name) {
  const Eigen::MatrixXd none = Eigen::MatrixXd::Zero(static_cast<Index>(r.states.size()), kin::kContactCount);
  write_states(r.states, none, r.vars.beta, motion_path, skeleton_hash, frame_rate, name);
  write_json({{"beta", std::vector<double>(r.vars.beta.data(), r.vars.beta.data() + r.vars.beta.size())},
              {"energy_trace", r.trace},
              {"energy", r.energy.to_json()},
              {"reference_frame", r.vars.ref.to_json()}},
             sidecar_path);
}

}  // namespace motionprior::fit
