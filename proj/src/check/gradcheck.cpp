#include "motionprior/check/gradcheck.hpp"

#include "motionprior/data/synthetic.hpp"
#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/fit/fit.hpp"
#include "motionprior/kin/canonical.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/kin/geom_ops.hpp"
#include "motionprior/kin/rigid.hpp"

#include <algorithm>
#include <chrono>
#include <memory>

namespace motionprior::check {

using diff::Mat;
using diff::Tape;
using diff::Var;
using diff::Vec;
using kin::MotionState;

bool CheckReport::all_pass() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const EntryReport& e) { return e.pass; });
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries)
    j.push_back({{"name", e.name},
                 {"tolerance", e.tolerance},
                 {"worst_rel_error", e.worst},
                 {"instances", e.instances},
                 {"seconds", e.seconds},
                 {"pass", e.pass}});
  return {{"entries", j}, {"all_pass", all_pass()}};
}

model::Cvae randomized_outputs(const model::Cvae& m, std::uint64_t seed, double scale) {
  model::Cvae out = m;
  const auto& c = m.config();
  const std::vector<std::string> prefixes{"enc." + std::to_string(c.encoder_hidden.size()),
                                          "pri." + std::to_string(c.prior_hidden.size()),
                                          "dec." + std::to_string(c.decoder_hidden.size())};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (const auto& s : out.params().segments()) {
    if (std::none_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return s.name.rfind(p, 0) == 0; }))
      continue;
    auto v = out.params().view(s.name);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += u(rng);
  }
  return out;
}

namespace {

Mat row_of(const MotionState& s) { return s.to_features().transpose(); }

Vec flat(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Vec grad_of(const Tape& t, Var v) {
  const Mat g = t.grad(v);
  return flat(g);
}

MotionState random_state(std::mt19937_64& rng, const kin::Skeleton& skel) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MotionState s;
  s.r = Eigen::Vector3d(nd(rng), nd(rng), 0.9 + 0.05 * nd(rng));
  s.phi = Eigen::Vector3d(0.1 * nd(rng), 0.1 * nd(rng), 2.0 * nd(rng));
  for (int a = 0; a < 3; ++a) {
    s.r_dot[a] = 0.5 * nd(rng);
    s.phi_dot[a] = 0.5 * nd(rng);
  }
  for (int k = 0; k < kin::kBoneCount; ++k)
    for (int a = 0; a < 3; ++a) s.theta(k, a) = 0.3 * nd(rng);
  kin::refresh_joints(skel, Eigen::VectorXd::Zero(kin::kShapeDim), s);
  for (int j = 0; j < kin::kJointCount; ++j)
    for (int a = 0; a < 3; ++a) s.joints_dot(j, a) = 0.5 * nd(rng);
  return s;
}

std::vector<Eigen::Index> sample_coords(std::mt19937_64& rng, Eigen::Index n, int k) {
  if (n <= k) return {};
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> c;
  for (int i = 0; i < k; ++i) c.push_back(pick(rng));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

gmm::InitGmm clip_gmm(const data::MotionClip& clip) {
  Eigen::VectorXd w(2);
  w << 0.4, 0.6;
  Eigen::MatrixXd means(2, gmm::kInitDim);
  means.row(0) = gmm::init_vector(kin::canonicalize(clip.states.front()).first).transpose();
  means.row(1) = gmm::init_vector(kin::canonicalize(clip.states.back()).first).transpose();
  std::vector<Eigen::MatrixXd> covs(2, Eigen::MatrixXd::Identity(gmm::kInitDim, gmm::kInitDim) * 0.5);
  return gmm::InitGmm::from_covariances(w, means, covs);
}

// Shared state for the fitting-energy entries; kept alive by the closures.
struct FitFixture {
  const kin::Skeleton* skel;
  const model::Cvae* model;
  gmm::InitGmm gmm;
  data::MotionClip clip;
  fit::Camera camera;
  std::vector<fit::Observation> obs;  // keypoints, 2D, cloud
  std::vector<fit::ReferenceFrame> refs;
  std::vector<std::unique_ptr<fit::DataTerm>> data;
};

std::shared_ptr<FitFixture> make_fixture(const model::Cvae& m, const kin::Skeleton& skel, const gmm::InitGmm* g) {
  auto fx = std::make_shared<FitFixture>();
  fx->skel = &skel;
  fx->model = &m;
  fx->clip = data::generate_clip("walk-cycle", 0.4, 30.0, 1.0, 1.0, 7, skel);
  fx->clip.states.resize(6);
  fx->clip.contacts.conservativeResize(6, Eigen::NoChange);
  fx->gmm = g ? *g : clip_gmm(fx->clip);
  fx->camera = fit::Camera::look_at(Eigen::Vector3d(3.0, -3.0, 1.5), fx->clip.states[0].r);
  std::mt19937_64 rng(11);
  fx->obs.push_back(fit::observe_keypoints(fx->clip, skel, 0.9));
  fx->obs.push_back(fit::observe_joints2d(fx->clip, fx->camera, 3.0, rng));
  fx->obs.push_back(fit::observe_point_cloud(fx->clip, skel, 0.01, 0.2, rng));
  for (const auto& o : fx->obs) {
    fx->refs.push_back(fit::choose_reference_frame(o, fx->camera, skel, {}));
    fx->data.push_back(std::make_unique<fit::DataTerm>(o, fx->camera, fx->refs.back(), fit::EnergyWeights{}, skel,
                                                       kernels::Exec::Serial));
  }
  return fx;
}

fit::EnergyWeights only(double fit::EnergyWeights::*field) {
  fit::EnergyWeights w;
  for (double fit::EnergyWeights::*f :
       {&fit::EnergyWeights::data, &fit::EnergyWeights::shape, &fit::EnergyWeights::cvae, &fit::EnergyWeights::init,
        &fit::EnergyWeights::c, &fit::EnergyWeights::b, &fit::EnergyWeights::cv, &fit::EnergyWeights::ch,
        &fit::EnergyWeights::gnd, &fit::EnergyWeights::pose, &fit::EnergyWeights::smooth})
    w.*f = 0.0;
  w.*field = 1.0;
  return w;
}

}  // namespace

std::vector<CheckEntry> gradient_registry(const model::Cvae& m, const kin::Skeleton& skel, const gmm::InitGmm* g) {
  std::vector<CheckEntry> out;
  const auto& layout = kin::feature_rigid_layout();
  const int latent = m.config().latent;

  out.push_back({"fk", 1e-4, [&skel](std::mt19937_64& rng) {
                   const MotionState s = random_state(rng, skel);
                   Vec x(3 + 3 + 3 * kin::kBoneCount + kin::kShapeDim);
                   x << s.r, s.phi, Eigen::Map<const Vec>(s.theta.data(), s.theta.size()),
                       Vec::Random(kin::kShapeDim) * 0.3;
                   const Mat wj = Mat::Random(1, 3 * kin::kJointCount);
                   const Mat wm = Mat::Random(1, 3 * skel.marker_count());
                   CheckCase c;
                   c.x = x;
                   c.f = [&skel, wj, wm](const Vec& v, Vec* grad) {
                     Tape t;
                     Var xv = grad ? t.variable(Mat(v.transpose())) : t.constant(Mat(v.transpose()));
                     const kin::FkVars fk =
                         kin::fk_op(skel, diff::slice_cols(xv, 0, 3), kin::rodrigues_op(diff::slice_cols(xv, 3, 3)),
                                    kin::rodrigues_op(diff::slice_cols(xv, 6, 3 * kin::kBoneCount)),
                                    diff::slice_cols(xv, 6 + 3 * kin::kBoneCount, kin::kShapeDim), kernels::Exec::Serial);
                     Var e = diff::add(diff::sum(diff::mul(fk.joints, t.constant(wj))),
                                       diff::sum(diff::mul(fk.markers, t.constant(wm))));
                     if (grad) {
                       t.backward(e);
                       *grad = grad_of(t, xv);
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  // network inputs in the canonical frame of a random previous state
  auto canon_pair = [&skel, &layout](std::mt19937_64& rng, Mat& xc, Mat& pc) {
    const MotionState a = random_state(rng, skel), b = random_state(rng, skel);
    const Mat pb = row_of(b);
    const Mat params = kin::canonical_params(pb);
    pc = kin::rigid_apply(pb, params, layout, false);
    xc = kin::rigid_apply(row_of(a), params, layout, false);
  };

  out.push_back({"encoder", 1e-4, [&m, latent, canon_pair](std::mt19937_64& rng) {
                   Mat xc, pc;
                   canon_pair(rng, xc, pc);
                   const Mat wmu = Mat::Random(1, latent), wls = Mat::Random(1, latent);
                   CheckCase c;
                   c.x = flat(xc);
                   c.coords = sample_coords(rng, c.x.size(), 80);
                   c.f = [&m, pc, wmu, wls](const Vec& v, Vec* grad) {
                     Tape t;
                     const model::CvaeVars mv = m.bind(t, false);
                     Var xv = grad ? t.variable(Mat(v.transpose())) : t.constant(Mat(v.transpose()));
                     const model::GaussianVars q = m.encode_op(mv, xv, t.constant(pc));
                     Var e = diff::add(diff::sum(diff::mul(q.mu, t.constant(wmu))),
                                       diff::sum(diff::mul(q.log_sigma, t.constant(wls))));
                     if (grad) {
                       t.backward(e);
                       *grad = grad_of(t, xv);
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  out.push_back({"prior", 1e-4, [&m, latent, canon_pair](std::mt19937_64& rng) {
                   Mat xc, pc;
                   canon_pair(rng, xc, pc);
                   const Mat wmu = Mat::Random(1, latent), wls = Mat::Random(1, latent);
                   CheckCase c;
                   c.x = flat(pc);
                   c.coords = sample_coords(rng, c.x.size(), 80);
                   c.f = [&m, wmu, wls](const Vec& v, Vec* grad) {
                     Tape t;
                     const model::CvaeVars mv = m.bind(t, false);
                     Var xv = grad ? t.variable(Mat(v.transpose())) : t.constant(Mat(v.transpose()));
                     const model::GaussianVars p = m.prior_op(mv, xv);
                     Var e = diff::add(diff::sum(diff::mul(p.mu, t.constant(wmu))),
                                       diff::sum(diff::mul(p.log_sigma, t.constant(wls))));
                     if (grad) {
                       t.backward(e);
                       *grad = grad_of(t, xv);
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  out.push_back({"decoder", 1e-4, [&m, latent, canon_pair](std::mt19937_64& rng) {
                   Mat xc, pc;
                   canon_pair(rng, xc, pc);
                   const Mat wd = Mat::Random(1, model::kDecoderOut);
                   std::normal_distribution<double> nd;
                   Vec z0(latent + pc.size());
                   for (Eigen::Index i = 0; i < latent; ++i) z0[i] = nd(rng);
                   z0.tail(pc.size()) = flat(pc);
                   CheckCase c;
                   c.x = z0;
                   c.coords = sample_coords(rng, c.x.size(), 80);
                   for (Eigen::Index i = 0; i < latent; ++i) c.coords.push_back(i);
                   std::sort(c.coords.begin(), c.coords.end());
                   c.coords.erase(std::unique(c.coords.begin(), c.coords.end()), c.coords.end());
                   c.f = [&m, latent, wd](const Vec& v, Vec* grad) {
                     Tape t;
                     const model::CvaeVars mv = m.bind(t, false);
                     Var zv = grad ? t.variable(Mat(v.head(latent).transpose())) : t.constant(Mat(v.head(latent).transpose()));
                     Var pv = grad ? t.variable(Mat(v.tail(v.size() - latent).transpose()))
                                   : t.constant(Mat(v.tail(v.size() - latent).transpose()));
                     const model::DecodeVars d = m.decode_op(mv, zv, pv);
                     Var e = diff::sum(diff::mul(diff::concat_cols({d.delta, d.logits}), t.constant(wd)));
                     if (grad) {
                       t.backward(e);
                       grad->resize(v.size());
                       *grad << grad_of(t, zv), grad_of(t, pv);
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  out.push_back({"network-parameters", 1e-4, [&m, &skel, &layout, latent](std::mt19937_64& rng) {
                   const MotionState a = random_state(rng, skel), b = random_state(rng, skel);
                   const Mat pb = row_of(b);
                   const Mat ac = kin::rigid_apply(row_of(a), kin::canonical_params(pb), layout, false);
                   const Mat wx = Mat::Random(1, kin::feature_layout::kSize);
                   const Mat z = Mat::Random(1, latent);
                   auto mm = std::make_shared<model::Cvae>(m);
                   CheckCase c;
                   c.x = m.params().values();
                   c.coords = sample_coords(rng, c.x.size(), 60);
                   c.f = [mm, pb, ac, wx, z](const Vec& p, Vec* grad) {
                     mm->params().values() = p;
                     Tape t;
                     const model::CvaeVars v = mm->bind(t, grad != nullptr);
                     const model::StepVars s = mm->step_op(v, t.constant(pb), t.constant(z), true);
                     const model::GaussianVars q = mm->encode_op(v, t.constant(ac), s.prev_canon);
                     Var e = diff::sum(diff::mul(s.next_world, t.constant(wx)));
                     e = diff::add(e, diff::add(diff::sum(diff::square(s.prior.mu)), diff::sum(diff::square(q.log_sigma))));
                     e = diff::add(e, diff::sum(s.out.logits));
                     if (grad) {
                       t.backward(e);
                       *grad = v.gradient(t, p.size());
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  auto fx_holder = std::make_shared<std::shared_ptr<FitFixture>>();
  auto fixture = [&m, &skel, g, fx_holder]() {
    if (!*fx_holder) *fx_holder = make_fixture(m, skel, g);
    return *fx_holder;
  };

  out.push_back({"gmm-log-likelihood", 1e-4, [fixture](std::mt19937_64& rng) {
                   auto fx = fixture();
                   const MotionState s = fx->clip.states[rng() % fx->clip.states.size()];
                   CheckCase c;
                   c.x = gmm::init_vector(kin::canonicalize(s).first) + Vec::Random(gmm::kInitDim) * 0.3;
                   c.f = [fx](const Vec& v, Vec* grad) {
                     Tape t;
                     Var xv = grad ? t.variable(Mat(v.transpose())) : t.constant(Mat(v.transpose()));
                     Var e = diff::sum(gmm::log_likelihood_op(fx->gmm, xv));
                     if (grad) {
                       t.backward(e);
                       *grad = grad_of(t, xv);
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});

  // initialization energies, per frame (no rollout)
  using F = double fit::EnergyWeights::*;
  const std::vector<std::pair<std::string, std::pair<F, int>>> init_terms{
      {"init-energy.data-keypoints", {&fit::EnergyWeights::data, 0}},
      {"init-energy.data-2d", {&fit::EnergyWeights::data, 1}},
      {"init-energy.data-cloud", {&fit::EnergyWeights::data, 2}},
      {"init-energy.pose", {&fit::EnergyWeights::pose, 0}},
      {"init-energy.smooth", {&fit::EnergyWeights::smooth, 0}}};
  for (const auto& [name, spec] : init_terms) {
    const F field = spec.first;
    const int variant = spec.second;
    out.push_back({name, 1e-4, [fixture, field, variant](std::mt19937_64& rng) {
                     auto fx = fixture();
                     auto e = std::make_shared<fit::InitEnergy>(*fx->skel, *fx->data[variant], only(field),
                                                                kernels::Exec::Serial);
                     std::normal_distribution<double> nd(0.0, 0.2);
                     Vec x(e->size());
                     for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = nd(rng);
                     for (int t = 0; t < e->frames(); ++t)
                       x.segment<3>(3 * t) += fx->refs[variant].to_ref(fx->clip.states[t].r);
                     CheckCase c;
                     c.x = x;
                     c.f = [fx, e](const Vec& v, Vec* grad) { return e->evaluate(v, grad); };
                     return c;
                   }});
  }

  // fitting energy terms through a 5-step rollout
  const std::vector<std::pair<std::string, F>> fit_terms{
      {"energy.cvae", &fit::EnergyWeights::cvae}, {"energy.init", &fit::EnergyWeights::init},
      {"energy.data", &fit::EnergyWeights::data}, {"energy.skel", &fit::EnergyWeights::c},
      {"energy.env", &fit::EnergyWeights::cv},    {"energy.gnd", &fit::EnergyWeights::gnd},
      {"energy.shape", &fit::EnergyWeights::shape}};
  for (const auto& [name, field] : fit_terms) {
    const bool through_rollout = name != "energy.gnd" && name != "energy.shape";
    out.push_back({name, through_rollout ? 1e-3 : 1e-4, [fixture, field, name, latent](std::mt19937_64& rng) {
                     auto fx = fixture();
                     fit::EnergyWeights w = only(field);
                     if (name == "energy.skel") w.b = 10.0;
                     if (name == "energy.env") {
                       w.ch = 1.0;
                       w.contact_height = 0.0;  // keeps the hinge away from its kink
                     }
                     std::normal_distribution<double> nd;
                     Eigen::MatrixXd z(5, latent);
                     for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = nd(rng);
                     const fit::FitVariables v = fit::make_variables(fx->clip.states[0], z, fx->clip.shape, fx->refs[0], {});
                     auto e = std::make_shared<fit::FitEnergy>(*fx->model, fx->gmm, *fx->skel, *fx->data[0], w,
                                                               v.g + Eigen::Vector3d(0.01, -0.02, 0.03), 5,
                                                               kernels::Exec::Serial);
                     CheckCase c;
                     c.x = e->pack(v);
                     for (Eigen::Index i = 0; i < c.x.size(); ++i) c.x[i] += 0.02 * nd(rng);
                     c.coords = sample_coords(rng, e->g_offset(), 40);
                     for (Eigen::Index i = e->g_offset(); i < e->size(); ++i) c.coords.push_back(i);
                     c.f = [fx, e](const Vec& x, Vec* grad) { return e->evaluate(x, grad); };
                     return c;
                   }});
  }

  out.push_back({"rollout-T5", 1e-3, [&m, &skel, latent](std::mt19937_64& rng) {
                   const MotionState x0 = random_state(rng, skel);
                   std::normal_distribution<double> nd;
                   Vec z(5 * latent);
                   for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = nd(rng);
                   const Mat w = Mat::Random(1, kin::feature_layout::kSize);
                   const Mat start = row_of(x0);
                   CheckCase c;
                   c.x = z;
                   c.coords = sample_coords(rng, c.x.size(), 80);
                   c.f = [&m, latent, w, start](const Vec& v, Vec* grad) {
                     Tape t;
                     const model::CvaeVars mv = m.bind(t, false);
                     const Mat zm = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                         v.data(), 5, latent);
                     Var zv = grad ? t.variable(zm) : t.constant(zm);
                     Var x = t.constant(start);
                     for (int k = 0; k < 5; ++k) x = m.step_op(mv, x, diff::slice_rows(zv, k, 1), false).next_world;
                     Var e = diff::sum(diff::mul(x, t.constant(w)));
                     if (grad) {
                       t.backward(e);
                       const Mat gm = t.grad(zv);
                       grad->resize(v.size());
                       for (int k = 0; k < 5; ++k) grad->segment(k * latent, latent) = gm.row(k).transpose();
                     }
                     return e.value()(0, 0);
                   };
                   return c;
                 }});
  return out;
}

CheckReport run_gradient_checks(const std::vector<CheckEntry>& entries, const CheckOptions& opts) {
  require(opts.instances >= 1, ErrorKind::Config, "check: instances must be >= 1");
  CheckReport rep;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const CheckEntry& e = entries[i];
    std::mt19937_64 rng(opts.seed * 1000003 + i);
    EntryReport r;
    r.name = e.name;
    r.tolerance = e.tolerance;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < opts.instances; ++k) {
      CheckCase c = e.make(rng);
      diff::DiffFunction f = c.f;
      if (!opts.corrupt.empty() && opts.corrupt == e.name)
        f = [inner = c.f](const Vec& x, Vec* g) {
          const double v = inner(x, g);
          if (g) g->array() = g->array() * 1.1 + 0.1;
          return v;
        };
      const diff::GradCheckResult gr = diff::grad_check(f, c.x, opts.eps, c.coords);
      r.worst = std::max(r.worst, std::isfinite(gr.max_rel_error) ? gr.max_rel_error : 1e300);
      ++r.instances;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.pass = r.worst < r.tolerance;
    rep.entries.push_back(r);
  }
  return rep;
}

}  // namespace motionprior::check
