#include "motionprior/fit/energy.hpp"

#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kernels/chamfer.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/kin/geom_ops.hpp"
#include "motionprior/kin/rigid.hpp"
#include "motionprior/kin/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace motionprior::fit {

namespace fl = kin::feature_layout;

// ---------------------------------------------------------------- weights

void EnergyWeights::validate() const {
  for (double v : {data, shape, cvae, init, c, b, cv, ch, gnd, pose, smooth})
    require(v >= 0.0 && std::isfinite(v), ErrorKind::Config, "energy weights must be non-negative");
  require(gm_sigma > 0.0, ErrorKind::Config, "Geman-McClure sigma must be positive");
  require(bisquare_kappa > 0.0, ErrorKind::Config, "bisquare kappa must be positive");
  require(contact_height >= 0.0, ErrorKind::Config, "contact height must be non-negative");
  require(min_confidence >= 0.0 && min_confidence <= 1.0, ErrorKind::Config, "min confidence must be in [0, 1]");
}

namespace {

struct WeightField {
  const char* name;
  double EnergyWeights::*ptr;
};

constexpr WeightField kWeightFields[] = {
    {"data", &EnergyWeights::data},       {"shape", &EnergyWeights::shape},
    {"cvae", &EnergyWeights::cvae},       {"init", &EnergyWeights::init},
    {"c", &EnergyWeights::c},             {"b", &EnergyWeights::b},
    {"cv", &EnergyWeights::cv},           {"ch", &EnergyWeights::ch},
    {"gnd", &EnergyWeights::gnd},         {"pose", &EnergyWeights::pose},
    {"smooth", &EnergyWeights::smooth},   {"gm_sigma", &EnergyWeights::gm_sigma},
    {"bisquare_kappa", &EnergyWeights::bisquare_kappa},
    {"contact_height", &EnergyWeights::contact_height},
    {"min_confidence", &EnergyWeights::min_confidence},
};

}  // namespace

nlohmann::json EnergyWeights::to_json() const {
  nlohmann::json j;
  for (const auto& f : kWeightFields) j[f.name] = this->*f.ptr;
  return j;
}

EnergyWeights EnergyWeights::from_json(const nlohmann::json& j) {
  if (j.is_string()) return preset(j.get<std::string>());
  require(j.is_object(), ErrorKind::Config, "weights must be a preset name or an object");
  EnergyWeights w = preset(j.value("preset", std::string("occluded-keypoints")));
  for (const auto& [key, val] : j.items()) {
    if (key == "preset") continue;
    bool found = false;
    for (const auto& f : kWeightFields)
      if (key == f.name) {
        require(val.is_number(), ErrorKind::Config, "weight '" + key + "' must be a number");
        w.*f.ptr = val.get<double>();
        found = true;
      }
    require(found, ErrorKind::Config, "unknown energy weight '" + key + "'");
  }
  w.validate();
  return w;
}

EnergyWeights EnergyWeights::preset(const std::string& name) {
  EnergyWeights w;
  if (name == "occluded-keypoints") return w;
  if (name == "noisy-joints") {
    w.cvae = w.init = 1e-3;
    w.smooth = 10.0;
    return w;
  }
  if (name == "rgb" || name == "rgbd") {
    const bool depth = name == "rgbd";
    w.data = depth ? 1.0 : 1e-3;
    w.shape = depth ? 3.0 : 4.5;
    w.pose = depth ? 0.1 : 0.04;
    w.smooth = 100.0;
    w.cvae = w.init = 0.075;
    w.c = 100.0;
    w.b = 2e3;
    w.cv = depth ? 100.0 : 0.0;
    w.ch = 10.0;
    w.gnd = depth ? 90.0 : 15.0;
    return w;
  }
  throw Error(ErrorKind::Config, "unknown weight preset '" + name + "'");
}

// ---------------------------------------------------------------- robust functions

double geman_mcclure(double r, double sigma) {
  const double s2 = sigma * sigma, r2 = r * r;
  if (std::isinf(r)) return s2;
  return s2 * r2 / (s2 + r2);
}

double bisquare_weight(double rhat, double kappa) {
  const double u = rhat / kappa;
  if (std::abs(u) >= 1.0) return 0.0;
  const double v = 1.0 - u * u;
  return v * v;
}

namespace {

constexpr double kMadScale = 1.4826;
constexpr double kMinRobustSigma = 1e-3;  // m

// Indices of the median element(s) with their averaging coefficients.
struct MedianPick {
  double value = 0.0;
  int idx[2] = {0, 0};
  double coef[2] = {1.0, 0.0};
};

MedianPick pick_median(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b] || (v[a] == v[b] && a < b); });
  MedianPick m;
  if (n % 2 == 1) {
    m.idx[0] = m.idx[1] = order[n / 2];
    m.coef[0] = 1.0;
    m.coef[1] = 0.0;
  } else {
    m.idx[0] = order[n / 2 - 1];
    m.idx[1] = order[n / 2];
    m.coef[0] = m.coef[1] = 0.5;
  }
  m.value = m.coef[0] * v[m.idx[0]] + m.coef[1] * v[m.idx[1]];
  return m;
}

}  // namespace

double mad_sigma(const Eigen::VectorXd& r) {
  require(r.size() > 0, ErrorKind::Precondition, "mad_sigma: empty residuals");
  std::vector<double> v(r.data(), r.data() + r.size());
  const double med = pick_median(v).value;
  for (double& x : v) x = std::abs(x - med);
  return kMadScale * pick_median(v).value;
}

// ---------------------------------------------------------------- reference frame

namespace {
double snap(double v) { return std::ldexp(std::nearbyint(std::ldexp(v, 24)), -24); }
}  // namespace

Eigen::Vector3d snap_to_grid(const Eigen::Vector3d& v) { return {snap(v.x()), snap(v.y()), snap(v.z())}; }

Eigen::Matrix3d ReferenceFrame::rotation() const { return kin::rot_z(-yaw); }

Mat ReferenceFrame::params() const {
  const Eigen::Matrix3d q = rotation();
  const Eigen::Vector3d t = -(q * origin);
  Mat p(1, 12);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p(0, 3 * a + b) = q(a, b);
  for (int a = 0; a < 3; ++a) p(0, 9 + a) = t[a];
  return p;
}

Eigen::Vector3d ReferenceFrame::to_ref(const Eigen::Vector3d& p) const { return rotation() * (p - origin); }
Eigen::Vector3d ReferenceFrame::from_ref(const Eigen::Vector3d& p) const {
  return rotation().transpose() * p + origin;
}

Eigen::Vector3d ReferenceFrame::plane_to_ref(const kin::GroundPlane& g) const {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 0.0;
  if (!g.is_default()) g.decompose(Eigen::Vector3d::UnitZ(), n, d);
  const double d_ref = d + n.dot(origin);
  require(std::abs(d_ref) > 1e-3, ErrorKind::Precondition,
          "fitting reference origin lies on the ground plane");
  return d_ref * (rotation() * n);
}

kin::GroundPlane ReferenceFrame::plane_from_ref(const Eigen::Vector3d& g_ref) const {
  Eigen::Vector3d n_ref;
  double d_ref = 0.0;
  kin::GroundPlane{g_ref}.decompose(Eigen::Vector3d::UnitZ(), n_ref, d_ref);
  const Eigen::Vector3d n = rotation().transpose() * n_ref;
  const double d = d_ref - n.dot(origin);
  return kin::GroundPlane::from_normal_offset(n, d);
}

nlohmann::json ReferenceFrame::to_json() const {
  return {{"yaw", yaw}, {"origin", {origin.x(), origin.y(), origin.z()}}};
}

ReferenceFrame ReferenceFrame::from_json(const nlohmann::json& j) {
  ReferenceFrame f;
  f.yaw = j.at("yaw").get<double>();
  const auto o = j.at("origin").get<std::vector<double>>();
  require(o.size() == 3, ErrorKind::Format, "reference origin needs 3 values");
  f.origin = Eigen::Vector3d(o[0], o[1], o[2]);
  return f;
}

// ---------------------------------------------------------------- data term

DataTerm::DataTerm(const Observation& obs, const Camera& cam, const ReferenceFrame& ref, const EnergyWeights& w,
                   const kin::Skeleton& skel, kernels::Exec exec)
    : kind_(obs.kind),
      frames_(obs.frame_count()),
      sigma_(w.gm_sigma),
      kappa_(w.bisquare_kappa),
      exec_(exec),
      cam_(cam) {
  obs.validate(skel);
  const Eigen::Matrix3d q = ref.rotation();
  const int n_pts = kind_ == ObsKind::PointCloud ? 0 : static_cast<int>(obs.points[0].rows());
  if (kind_ == ObsKind::Joints3D || kind_ == ObsKind::Keypoints3D) {
    target_ = Mat::Zero(frames_, 3 * n_pts);
    weight_ = Mat::Zero(frames_, 3 * n_pts);
  } else if (kind_ == ObsKind::Joints2D) {
    cam.validate();
    target_ = Mat::Zero(frames_, 2 * n_pts);
    weight_ = Mat::Zero(frames_, n_pts);
    // p_cam = Rc (q^T p_ref + origin) + tc
    const Eigen::Matrix3d rc = cam.rotation * q.transpose();
    const Eigen::Vector3d tc = cam.rotation * ref.origin + cam.translation;
    cam_params_.resize(1, 12);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) cam_params_(0, 3 * a + b) = rc(a, b);
    for (int a = 0; a < 3; ++a) cam_params_(0, 9 + a) = tc[a];
  }
  for (int t = 0; t < frames_; ++t) {
    const Eigen::MatrixXd& p = obs.points[t];
    Eigen::MatrixXd rp = p;
    Eigen::VectorXd rw = Eigen::VectorXd::Ones(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double wi = obs.weight(t, static_cast<int>(i), w.min_confidence);
      rw[i] = wi;
      if (kind_ == ObsKind::Joints2D) {
        target_(t, 2 * i) = p(i, 0);
        target_(t, 2 * i + 1) = p(i, 1);
        weight_(t, i) = wi;
        continue;
      }
      const Eigen::Vector3d v = wi > 0.0 ? snap_to_grid(Eigen::Vector3d(q * (p.row(i).transpose() - ref.origin)))
                                         : Eigen::Vector3d::Zero();
      rp.row(i) = v.transpose();
      if (kind_ != ObsKind::PointCloud)
        for (int d = 0; d < 3; ++d) {
          target_(t, 3 * i + d) = v[d];
          weight_(t, 3 * i + d) = wi;
        }
    }
    ref_points_.push_back(std::move(rp));
    ref_weights_.push_back(std::move(rw));
  }
}

Var DataTerm::energy(Var joints, Var markers) const {
  require(joints.rows() == frames_, ErrorKind::LengthMismatch, "data term: state count differs from observations");
  switch (kind_) {
    case ObsKind::Joints3D:
      return diff::weighted_sq_error(joints, target_, weight_);
    case ObsKind::Keypoints3D:
      return diff::weighted_sq_error(markers, target_, weight_);
    case ObsKind::Joints2D: {
      const int n = static_cast<int>(joints.cols() / 3);
      Var cp = kin::rigid_transform_op(joints, joints.tape()->constant(cam_params_), kin::points_layout(n), false);
      return projected_gm_op(cp, target_, weight_, cam_, sigma_);
    }
    case ObsKind::PointCloud:
      return chamfer_bisquare_op(diff::concat_cols({joints, markers}), ref_points_, kappa_, exec_);
  }
  throw Error(ErrorKind::Config, "data term: unknown observation variant");
}

Var projected_gm_op(Var p, const Mat& target, const Mat& conf, const Camera& c, double sigma) {
  const Mat& v = p.value();
  const Eigen::Index rows = v.rows(), n = v.cols() / 3;
  require(target.rows() == rows && target.cols() == 2 * n && conf.rows() == rows && conf.cols() == n,
          ErrorKind::DimensionMismatch, "projected_gm_op: shape mismatch");
  constexpr double kMinDepth = 1e-3;
  const double s2 = sigma * sigma;
  double e = 0.0;
  Mat gp = Mat::Zero(rows, v.cols());
  for (Eigen::Index b = 0; b < rows; ++b)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = conf(b, j);
      if (w <= 0.0) continue;
      const double x = v(b, 3 * j), y = v(b, 3 * j + 1), z = v(b, 3 * j + 2);
      const double zz = std::max(z, kMinDepth);
      const double du = c.fx * x / zz + c.cx - target(b, 2 * j);
      const double dv = c.fy * y / zz + c.cy - target(b, 2 * j + 1);
      const double r2 = du * du + dv * dv;
      e += w * s2 * r2 / (s2 + r2);
      const double k = 2.0 * w * s2 * s2 / ((s2 + r2) * (s2 + r2));
      gp(b, 3 * j) = k * du * c.fx / zz;
      gp(b, 3 * j + 1) = k * dv * c.fy / zz;
      if (z > kMinDepth) gp(b, 3 * j + 2) = -k * (du * c.fx * x + dv * c.fy * y) / (zz * zz);
    }
  Mat out(1, 1);
  out(0, 0) = e;
  return p.tape()->record(std::move(out), {p}, [p, gp](diff::Tape& t, const Mat& g) {
    t.accumulate_expr(p, g(0, 0) * gp);
  });
}

Var chamfer_bisquare_op(Var body, const std::vector<Eigen::MatrixXd>& clouds, double kappa, kernels::Exec exec) {
  const Mat& bv = body.value();
  const Eigen::Index frames = bv.rows(), k = bv.cols() / 3;
  require(static_cast<Eigen::Index>(clouds.size()) == frames, ErrorKind::LengthMismatch,
          "chamfer: one cloud per frame required");
  // nearest body point of every cloud point
  std::vector<int> frame_of, body_of;
  std::vector<double> dist;
  std::vector<Eigen::Vector3d> diffs;  // body - cloud
  for (Eigen::Index t = 0; t < frames; ++t) {
    if (clouds[t].rows() == 0) continue;
    kernels::Points pts(k, 3), qs(clouds[t].rows(), 3);
    for (Eigen::Index i = 0; i < k; ++i) pts.row(i) = bv.block(t, 3 * i, 1, 3);
    qs = clouds[t];
    std::vector<int> idx;
    Eigen::VectorXd sq;
    kernels::nearest_points(qs, pts, idx, sq, exec);
    for (Eigen::Index i = 0; i < qs.rows(); ++i) {
      frame_of.push_back(static_cast<int>(t));
      body_of.push_back(idx[i]);
      dist.push_back(std::sqrt(sq[i]));
      diffs.push_back((pts.row(idx[i]) - qs.row(i)).transpose());
    }
  }
  Mat out = Mat::Zero(1, 1);
  const int n = static_cast<int>(dist.size());
  if (n == 0) return body.tape()->constant(out);

  const MedianPick med = pick_median(dist);
  std::vector<double> dev(n);
  for (int i = 0; i < n; ++i) dev[i] = std::abs(dist[i] - med.value);
  const MedianPick mad = pick_median(dev);
  const double s_raw = kMadScale * mad.value;
  const bool floored = s_raw < kMinRobustSigma;
  const double s = floored ? kMinRobustSigma : s_raw;

  std::vector<double> g_dist(n);
  double e = 0.0, de_ds = 0.0;
  const double k2 = kappa * kappa;
  for (int i = 0; i < n; ++i) {
    const double d = dist[i], rh = d / s;
    const double w = bisquare_weight(rh, kappa);
    e += w * d * d;
    const double u = 1.0 - rh * rh / k2;
    const double dw = std::abs(rh) < kappa ? -4.0 * rh * u / k2 : 0.0;  // dw/drhat
    g_dist[i] = dw * d * d / s + 2.0 * w * d;
    de_ds += dw * (-d / (s * s)) * d * d;
  }
  if (!floored && de_ds != 0.0) {
    // s = 1.4826 * median_i |d_i - m|, m = median(d)
    const double f = de_ds * kMadScale;
    double sgn_sum = 0.0;
    for (int a = 0; a < 2; ++a) {
      const int i = mad.idx[a];
      const double sg = dist[i] >= med.value ? 1.0 : -1.0;
      g_dist[i] += f * mad.coef[a] * sg;
      sgn_sum += mad.coef[a] * sg;
    }
    for (int a = 0; a < 2; ++a) g_dist[med.idx[a]] -= f * sgn_sum * med.coef[a];
  }
  Mat gb = Mat::Zero(frames, bv.cols());
  for (int i = 0; i < n; ++i) {
    const double d = std::max(dist[i], 1e-12);
    for (int a = 0; a < 3; ++a) gb(frame_of[i], 3 * body_of[i] + a) += g_dist[i] * diffs[i][a] / d;
  }
  out(0, 0) = e;
  return body.tape()->record(std::move(out), {body}, [body, gb](diff::Tape& t, const Mat& g) {
    t.accumulate_expr(body, g(0, 0) * gb);
  });
}

nlohmann::json EnergyBreakdown::to_json() const {
  return {{"data", data}, {"shape", shape}, {"cvae", cvae},     {"init", init},   {"skel", skel},
          {"env", env},   {"gnd", gnd},     {"pose", pose},     {"smooth", smooth}, {"total", total()}};
}

// ---------------------------------------------------------------- fit energy

namespace {

Mat row_of(const Vec& x, Eigen::Index off, Eigen::Index n) { return x.segment(off, n).transpose(); }

Mat block_of(const Vec& x, Eigen::Index off, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Mat>(x.data() + off, rows, cols);
}

void put_block(Vec& x, Eigen::Index off, const Mat& m) {
  Eigen::Map<Mat>(x.data() + off, m.rows(), m.cols()) = m;
}

// 3k columns -> k per-point sums of squares
Mat point_sum_matrix(int k) {
  Mat s = Mat::Zero(3 * k, k);
  for (int j = 0; j < k; ++j)
    for (int a = 0; a < 3; ++a) s(3 * j + a, j) = 1.0;
  return s;
}

Var add_terms(const std::vector<Var>& terms, diff::Tape& tape) {
  Var total = tape.constant(Mat::Zero(1, 1));
  for (const Var& v : terms) total = diff::add(total, v);
  return total;
}

}  // namespace

FitEnergy::FitEnergy(const model::Cvae& model, const gmm::InitGmm& gmm, const kin::Skeleton& skel,
                     const DataTerm& data, const EnergyWeights& w, const Eigen::Vector3d& g_init_ref, int steps,
                     kernels::Exec exec)
    : model_(model),
      gmm_(gmm),
      skel_(skel),
      data_(data),
      w_(w),
      g_init_(g_init_ref),
      steps_(steps),
      latent_(model.config().latent),
      exec_(exec) {
  w_.validate();
  require(steps_ >= 1, ErrorKind::Precondition, "fit energy needs at least one transition");
  require(data_.frames() == steps_ + 1, ErrorKind::LengthMismatch, "fit energy: observation length mismatch");
  require(gmm_.dim() == gmm::kInitDim, ErrorKind::DimensionMismatch, "fit energy: GMM dimension");
}

Vec FitEnergy::pack(const FitVariables& v) const {
  require(v.z_seq.rows() == steps_ && v.z_seq.cols() == latent_, ErrorKind::DimensionMismatch,
          "fit variables: latent sequence shape");
  Vec x(size());
  const auto& s = v.x0;
  x.segment<3>(0) = s.r;
  x.segment<3>(3) = s.r_dot;
  x.segment<3>(6) = s.phi;
  x.segment<3>(9) = s.phi_dot;
  put_block(x, 12, Mat(s.theta));
  put_block(x, 12 + 3 * kin::kBoneCount, Mat(s.joints_dot));
  put_block(x, z_offset(), Mat(v.z_seq));
  x.segment<3>(g_offset()) = v.g;
  x.segment(beta_offset(), kin::kShapeDim) = v.beta;
  return x;
}

void FitEnergy::unpack(const Vec& x, FitVariables& v) const {
  auto& s = v.x0;
  s.r = x.segment<3>(0);
  s.r_dot = x.segment<3>(3);
  s.phi = x.segment<3>(6);
  s.phi_dot = x.segment<3>(9);
  s.theta = block_of(x, 12, kin::kBoneCount, 3);
  s.joints_dot = block_of(x, 12 + 3 * kin::kBoneCount, kin::kJointCount, 3);
  v.z_seq = block_of(x, z_offset(), steps_, latent_);
  v.g = x.segment<3>(g_offset());
  v.beta = x.segment(beta_offset(), kin::kShapeDim);
  kin::refresh_joints(skel_, v.beta, s);
}

double FitEnergy::evaluate(const Vec& x, Vec* grad, EnergyBreakdown* parts, RolloutOutputs* out) const {
  using namespace diff;
  require(x.size() == size(), ErrorKind::DimensionMismatch, "fit energy: variable length");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Tape tape;
  const bool need = grad != nullptr;
  auto input = [&](Mat m) { return need ? tape.variable(std::move(m)) : tape.constant(std::move(m)); };
  Var x0v = input(row_of(x, 0, kX0Size));
  Var zv = input(block_of(x, z_offset(), steps_, latent_));
  Var gv = input(row_of(x, g_offset(), 3));
  Var bv = input(row_of(x, beta_offset(), kin::kShapeDim));
  const model::CvaeVars mv = model_.bind(tape, false);

  Var r0 = slice_cols(x0v, 0, 3);
  Var root0 = kin::rodrigues_op(slice_cols(x0v, 6, 3));
  Var pose0 = kin::rodrigues_op(slice_cols(x0v, 12, 3 * kin::kBoneCount));
  const kin::FkVars fk0 = kin::fk_op(skel_, r0, root0, pose0, bv, exec_);
  Var x0f = concat_cols({r0, slice_cols(x0v, 3, 3), root0, slice_cols(x0v, 9, 3), pose0, fk0.joints,
                         slice_cols(x0v, 12 + 3 * kin::kBoneCount, 3 * kin::kJointCount)});

  const bool with_prior = w_.cvae > 0.0;
  std::vector<Var> feats{x0f}, mus, sigmas, logits;
  Var prev = x0f;
  for (int t = 0; t < steps_; ++t) {
    const model::StepVars s = model_.step_op(mv, prev, slice_rows(zv, t, 1), with_prior);
    if (!s.next_world.value().allFinite()) {
      if (grad) *grad = Vec::Zero(x.size());
      return kInf;
    }
    feats.push_back(s.next_world);
    logits.push_back(s.out.logits);
    if (with_prior) {
      mus.push_back(s.prior.mu);
      sigmas.push_back(s.prior.log_sigma);
    }
    prev = s.next_world;
  }
  Var all = concat_rows(feats);
  const kin::FkVars fk = kin::fk_op(skel_, slice_cols(all, fl::kR, 3), slice_cols(all, fl::kRootRot, 9),
                                    slice_cols(all, fl::kPoseRot, 9 * kin::kBoneCount), bv, exec_);
  const int nj = kin::kJointCount, nm = skel_.marker_count();
  Var contacts = sigmoid(concat_rows(logits));

  EnergyBreakdown eb;
  std::vector<Var> terms;
  auto add_term = [&](Var v, double& slot) {
    slot = v.value()(0, 0);
    terms.push_back(v);
  };

  if (with_prior) {
    Var lp = model::gaussian_log_density_op(zv, {concat_rows(mus), concat_rows(sigmas)});
    add_term(scale(sum(lp), -w_.cvae), eb.cvae);
  }
  if (w_.init > 0.0) {
    Var cp = kin::canonical_params_op(x0f);
    Var x0c = kin::rigid_transform_op(x0f, cp, kin::feature_rigid_layout(), false);
    add_term(scale(sum(gmm::log_likelihood_op(gmm_, gmm::init_vector_op(x0c))), -w_.init), eb.init);
  }
  Var ground = kin::ground_params_op(gv, Eigen::Vector3d::UnitZ());
  if (w_.data > 0.0) {
    Var jr = kin::rigid_transform_op(fk.joints, ground, kin::points_layout(nj), true);
    Var mr = kin::rigid_transform_op(fk.markers, ground, kin::points_layout(nm), true);
    add_term(scale(data_.energy(jr, mr), w_.data), eb.data);
  }
  Var j_reg = slice_cols(all, fl::kJoints, 3 * nj);
  if (w_.c > 0.0 || w_.b > 0.0) {
    std::vector<Var> sk;
    if (w_.c > 0.0)
      sk.push_back(scale(sum(square(sub(slice_rows(fk.joints, 1, steps_), slice_rows(j_reg, 1, steps_)))), w_.c));
    if (w_.b > 0.0) {
      Var len = kin::bone_lengths_op(skel_, j_reg);
      sk.push_back(scale(sum(square(sub(slice_rows(len, 1, steps_), slice_rows(len, 0, steps_)))), w_.b));
    }
    add_term(add_terms(sk, tape), eb.skel);
  }
  if (w_.cv > 0.0 || w_.ch > 0.0) {
    std::vector<int> cols, zcols;
    for (int j : skel_.contact_joints) {
      for (int a = 0; a < 3; ++a) cols.push_back(3 * j + a);
      zcols.push_back(3 * j + 2);
    }
    const int nc = static_cast<int>(skel_.contact_joints.size());
    std::vector<Var> en;
    if (w_.cv > 0.0) {
      Var pc = gather_cols(fk.joints, cols);
      Var dv = sub(slice_rows(pc, 1, steps_), slice_rows(pc, 0, steps_));
      Var sq = matmul(square(dv), tape.constant(point_sum_matrix(nc)));
      en.push_back(scale(sum(mul(contacts, sq)), w_.cv));
    }
    if (w_.ch > 0.0) {
      Var hz = slice_rows(gather_cols(fk.joints, zcols), 1, steps_);
      Var over = relu(add_scalar(abs(hz), -w_.contact_height));
      en.push_back(scale(sum(mul(contacts, over)), w_.ch));
    }
    add_term(add_terms(en, tape), eb.env);
  }
  if (w_.gnd > 0.0) {
    Mat gi(1, 3);
    gi << g_init_.x(), g_init_.y(), g_init_.z();
    add_term(scale(sum(square(sub(gv, tape.constant(gi)))), w_.gnd), eb.gnd);
  }
  if (w_.shape > 0.0) add_term(scale(sum(square(bv)), w_.shape), eb.shape);

  Var total = add_terms(terms, tape);
  const double f = total.value()(0, 0);
  if (parts) *parts = eb;
  if (out) {
    out->features = all.value();
    out->fk_joints = fk.joints.value();
    out->contacts = contacts.value();
    out->ground = ground.value();
  }
  if (grad) {
    grad->resize(x.size());
    if (!std::isfinite(f)) {
      grad->setZero();
      return kInf;
    }
    tape.backward(total);
    grad->segment(0, kX0Size) = tape.grad(x0v).row(0).transpose();
    put_block(*grad, z_offset(), tape.grad(zv));
    grad->segment(g_offset(), 3) = tape.grad(gv).row(0).transpose();
    grad->segment(beta_offset(), kin::kShapeDim) = tape.grad(bv).row(0).transpose();
  }
  return std::isfinite(f) ? f : kInf;
}

// ---------------------------------------------------------------- initialization energy

InitEnergy::InitEnergy(const kin::Skeleton& skel, const DataTerm& data, const EnergyWeights& w,
                       kernels::Exec exec)
    : skel_(skel), data_(data), w_(w), frames_(data.frames()), exec_(exec) {
  w_.validate();
}

double InitEnergy::evaluate(const Vec& x, Vec* grad, EnergyBreakdown* parts) const {
  using namespace diff;
  require(x.size() == size(), ErrorKind::DimensionMismatch, "init energy: variable length");
  Tape tape;
  const bool need = grad != nullptr;
  auto input = [&](Mat m) { return need ? tape.variable(std::move(m)) : tape.constant(std::move(m)); };
  const int f = frames_;
  Var rv = input(block_of(x, 0, f, 3));
  Var pv = input(block_of(x, phi_offset(), f, 3));
  Var tv = input(block_of(x, theta_offset(), f, 3 * kin::kBoneCount));
  Var bv = input(row_of(x, beta_offset(), kin::kShapeDim));
  const kin::FkVars fk = kin::fk_op(skel_, rv, kin::rodrigues_op(pv), kin::rodrigues_op(tv), bv, exec_);

  EnergyBreakdown eb;
  std::vector<Var> terms;
  auto add_term = [&](Var v, double& slot) {
    slot = v.value()(0, 0);
    terms.push_back(v);
  };
  if (w_.data > 0.0) add_term(scale(data_.energy(fk.joints, fk.markers), w_.data), eb.data);
  if (w_.shape > 0.0) add_term(scale(sum(square(bv)), w_.shape), eb.shape);
  if (w_.pose > 0.0) add_term(scale(sum(square(tv)), w_.pose), eb.pose);
  if (w_.smooth > 0.0 && f > 1)
    add_term(scale(sum(square(sub(slice_rows(fk.joints, 1, f - 1), slice_rows(fk.joints, 0, f - 1)))), w_.smooth),
             eb.smooth);
  Var total = add_terms(terms, tape);
  const double e = total.value()(0, 0);
  if (parts) *parts = eb;
  if (grad) {
    grad->resize(x.size());
    tape.backward(total);
    put_block(*grad, 0, tape.grad(rv));
    put_block(*grad, phi_offset(), tape.grad(pv));
    put_block(*grad, theta_offset(), tape.grad(tv));
    grad->segment(beta_offset(), kin::kShapeDim) = tape.grad(bv).row(0).transpose();
  }
  return e;
}

}  // namespace motionprior::fit
