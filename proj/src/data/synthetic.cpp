#include "motionprior/data/synthetic.hpp"

#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/kin/motion.hpp"
#include "motionprior/kin/rotation.hpp"

#include <algorithm>
#include <cmath>

namespace motionprior::data {

using kin::PoseMat;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kGravity = 9.81;

// joint indices of the built-in humanoid
enum J { Pelvis = 0, LHip = 1, RHip = 2, Spine1 = 3, LKnee = 4, RKnee = 5, Spine2 = 6, LAnkle = 7, RAnkle = 8,
         Spine3 = 9, LFoot = 10, RFoot = 11, Neck = 12, LCollar = 13, RCollar = 14, Head = 15, LShoulder = 16,
         RShoulder = 17, LElbow = 18, RElbow = 19, LWrist = 20, RWrist = 21 };

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

struct Pose {
  PoseMat theta = PoseMat::Zero();
  Matrix3d root_local = Matrix3d::Identity();
  double lift = 0.0;                         // extra height above the clamped stance
  Vector3d flight_vel = Vector3d::Zero();    // heading-frame velocity while airborne
  bool airborne = false;
  int stance = -1;  // 0 left, 1 right, -1 picks the lower foot

  void set(int joint, const Matrix3d& r) { theta.row(joint - 1) = kin::rotation_log(r).transpose(); }
  void set_x(int joint, double a) { set(joint, kin::rot_x(a)); }
};

// Legs: hip flexion h (thigh forward), knee flexion k >= 0, ankle keeps the sole
// tilted by `toe` relative to flat.
void set_leg(Pose& p, bool left, double hip, double knee, double toe = 0.0, double abduct = 0.0) {
  const int hj = left ? LHip : RHip, kj = left ? LKnee : RKnee, aj = left ? LAnkle : RAnkle;
  const double side = left ? -1.0 : 1.0;
  p.set(hj, kin::rot_x(hip) * kin::rot_y(side * -abduct));
  p.set_x(kj, -knee);
  p.set_x(aj, -(hip - knee) + toe);
}

// Arms hang from the T-pose by `down`; swing moves them forward, elbow bends forward.
void set_arm(Pose& p, bool left, double swing, double elbow, double down = 1.3, double raise = 0.0) {
  const int sj = left ? LShoulder : RShoulder, ej = left ? LElbow : RElbow;
  const double side = left ? -1.0 : 1.0;
  p.set(sj, kin::rot_x(swing) * kin::rot_y(side * (down - raise)));
  p.set(ej, kin::rot_z(side * elbow));
}

void set_spine(Pose& p, double bend, double side_bend, double twist) {
  const Matrix3d r = kin::rot_x(-bend) * kin::rot_y(side_bend) * kin::rot_z(twist);
  p.set(Spine1, r);
  p.set(Spine2, kin::rot_x(-0.4 * bend));
}

struct Params {
  std::mt19937_64 rng;
  double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

using PoseFn = std::function<Pose(double t)>;

PoseFn idle_sway(Params& pr) {
  const double w1 = pr.u(0.6, 1.4), w2 = pr.u(0.4, 1.0), w3 = pr.u(0.3, 0.9), wk = pr.u(0.3, 0.7);
  const double p1 = pr.u(0, 6.3), p2 = pr.u(0, 6.3), p3 = pr.u(0, 6.3), pk = pr.u(0, 6.3);
  const double a1 = pr.u(0.03, 0.10), a2 = pr.u(0.02, 0.08), a3 = pr.u(0.05, 0.2), ak = pr.u(0.0, 0.08);
  const double arm = pr.u(0.0, 0.25), el = pr.u(0.1, 0.5);
  return [=](double t) {
    Pose p;
    const double k = ak * (0.5 + 0.5 * std::sin(wk * t + pk)) + 0.03;
    set_leg(p, true, k * 0.5, k);
    set_leg(p, false, k * 0.5, k);
    set_spine(p, a1 * std::sin(w1 * t + p1), a2 * std::sin(w2 * t + p2), a3 * std::sin(w3 * t + p3));
    p.set(Neck, kin::rot_x(0.1 * std::sin(w2 * t + p1)) * kin::rot_z(0.2 * std::sin(w3 * t + p2)));
    set_arm(p, true, arm * std::sin(w1 * t + p3), el + 0.1 * std::sin(w2 * t));
    set_arm(p, false, -arm * std::sin(w1 * t + p2), el + 0.1 * std::cos(w2 * t));
    return p;
  };
}

PoseFn walk_cycle(Params& pr) {
  const double f = pr.u(0.8, 1.1), ph = pr.u(0, 6.3), hip_a = pr.u(0.3, 0.45), knee_a = pr.u(0.7, 1.0);
  const double arm_a = pr.u(0.2, 0.45), lean = pr.u(0.0, 0.1);
  return [=](double t) {
    Pose p;
    const double phi = 2.0 * M_PI * f * t + ph;
    for (int s = 0; s < 2; ++s) {
      const double q = phi + s * M_PI;
      const double hip = hip_a * std::sin(q);
      // swing while the hip moves forward; the knee folds and re-extends by 80% of swing
      const double u = std::cos(q) > 0.0 ? std::fmod(q + 0.5 * M_PI + 4.0 * M_PI, 2.0 * M_PI) / M_PI : -1.0;
      const double fold = u >= 0.0 ? std::pow(std::sin(M_PI * std::min(1.0, u / 0.8)), 2) : 0.0;
      const double knee = 0.08 + knee_a * fold;
      set_leg(p, s == 0, hip, knee, -0.2 * fold);
      if (u < 0.0) p.stance = s;
      set_arm(p, s == 0, -arm_a * std::sin(q), 0.3 + 0.15 * (1.0 - std::sin(q)));
    }
    set_spine(p, lean, 0.0, 0.1 * std::sin(phi));
    p.root_local = kin::rot_z(-0.06 * std::sin(phi));
    return p;
  };
}

PoseFn squat(Params& pr) {
  const double period = pr.u(2.0, 3.5), depth = pr.u(0.6, 1.1), ph = pr.u(0, 6.3), arm = pr.u(0.3, 1.0);
  return [=](double t) {
    Pose p;
    const double d = depth * 0.5 * (1.0 - std::cos(2.0 * M_PI * t / period + ph));
    set_leg(p, true, d, 1.8 * d);
    set_leg(p, false, d, 1.8 * d);
    set_spine(p, 0.4 * d, 0.0, 0.0);
    set_arm(p, true, arm * d, 0.2);
    set_arm(p, false, arm * d, 0.2);
    return p;
  };
}

PoseFn reach(Params& pr) {
  struct Key {
    bool left;
    double swing, raise, elbow, lean, twist, knee;
  };
  std::vector<Key> keys;
  for (int i = 0; i < 16; ++i)
    keys.push_back({pr.u(0, 1) < 0.5, pr.u(0.4, 1.6), pr.u(0.0, 0.9), pr.u(0.0, 0.4), pr.u(-0.1, 0.5),
                    pr.u(-0.4, 0.4), pr.u(0.0, 0.5)});
  const double cycle = pr.u(2.2, 3.0);
  return [=](double t) {
    Pose p;
    const int i = static_cast<int>(t / cycle) % static_cast<int>(keys.size());
    const double local = std::fmod(t, cycle) / cycle;
    // up over 35%, hold 20%, down over 35%, rest 10%
    const double w = local < 0.35 ? smoothstep(local / 0.35)
                                  : (local < 0.55 ? 1.0 : 1.0 - smoothstep((local - 0.55) / 0.35));
    const Key& k = keys[i];
    const double knee = 0.05 + k.knee * w;
    set_leg(p, true, 0.5 * knee, knee);
    set_leg(p, false, 0.5 * knee, knee);
    set_spine(p, k.lean * w, 0.0, (k.left ? 1.0 : -1.0) * k.twist * w);
    set_arm(p, k.left, k.swing * w, 0.3 + (k.elbow - 0.3) * w, 1.3, k.raise * w);
    set_arm(p, !k.left, 0.05 * w, 0.3);
    return p;
  };
}

PoseFn jump(Params& pr) {
  const double v0 = pr.u(1.5, 2.4), fwd = pr.u(0.0, 1.2), depth = pr.u(0.5, 0.9), lead = pr.u(0.2, 0.6);
  const double tf = 2.0 * v0 / kGravity;
  const double crouch = 0.5, push = 0.25, land = 0.35, recover = 0.45;
  const double cycle = lead + crouch + push + tf + land + recover;
  return [=](double t) {
    Pose p;
    double s = std::fmod(t, cycle);
    double d = 0.0, armup = 0.0;
    if (s < lead) {
      d = 0.0;
    } else if ((s -= lead) < crouch) {
      d = depth * smoothstep(s / crouch);
      armup = -0.5 * smoothstep(s / crouch);
    } else if ((s -= crouch) < push) {
      d = depth * (1.0 - smoothstep(s / push));
      armup = -0.5 + 1.5 * smoothstep(s / push);
    } else if ((s -= push) < tf) {
      p.airborne = true;
      p.lift = v0 * s - 0.5 * kGravity * s * s;
      p.flight_vel = Vector3d(0.0, fwd, 0.0);
      armup = 1.0 - 0.6 * smoothstep(s / tf);
      d = 0.15 * std::sin(M_PI * s / tf);
    } else if ((s -= tf) < land) {
      d = 0.8 * depth * std::sin(M_PI * 0.5 * smoothstep(s / land));
      armup = 0.4 * (1.0 - smoothstep(s / land));
    } else {
      s -= land;
      d = 0.8 * depth * (1.0 - smoothstep(s / recover));
    }
    const double toe = p.airborne ? 0.3 * std::sin(M_PI * (s / tf)) : 0.0;
    set_leg(p, true, d, 1.8 * d, toe);
    set_leg(p, false, d, 1.8 * d, toe);
    set_spine(p, 0.45 * d, 0.0, 0.0);
    set_arm(p, true, armup, 0.2);
    set_arm(p, false, armup, 0.2);
    return p;
  };
}

PoseFn sit_stand(Params& pr) {
  const double hip_a = pr.u(1.2, 1.5), knee_a = pr.u(1.6, 1.9), stand = pr.u(0.6, 1.2), sit = pr.u(0.6, 1.2);
  const double move = pr.u(1.0, 1.4), offset = pr.u(0.0, 2.0);
  const double cycle = stand + move + sit + move;
  return [=](double t) {
    Pose p;
    const double s = std::fmod(t + offset, cycle);
    double w = 0.0, lean = 0.0;
    if (s < stand) {
      w = 0.0;
    } else if (s < stand + move) {
      const double x = (s - stand) / move;
      w = smoothstep(x);
      lean = std::sin(M_PI * x);
    } else if (s < stand + move + sit) {
      w = 1.0;
    } else {
      const double x = (s - stand - move - sit) / move;
      w = 1.0 - smoothstep(x);
      lean = std::sin(M_PI * x);
    }
    set_leg(p, true, hip_a * w, knee_a * w);
    set_leg(p, false, hip_a * w, knee_a * w);
    set_spine(p, 0.25 * w + 0.35 * lean, 0.0, 0.0);
    set_arm(p, true, 0.4 * lean + 0.2 * w, 0.3 + 0.6 * w);
    set_arm(p, false, 0.4 * lean + 0.2 * w, 0.3 + 0.6 * w);
    return p;
  };
}

PoseFn make_family(const std::string& family, Params& pr) {
  if (family == "idle-sway") return idle_sway(pr);
  if (family == "walk-cycle") return walk_cycle(pr);
  if (family == "squat") return squat(pr);
  if (family == "reach") return reach(pr);
  if (family == "jump") return jump(pr);
  if (family == "sit-stand") return sit_stand(pr);
  throw Error(ErrorKind::Config, "unknown motion family '" + family + "'");
}

// Damped oscillator driven by white noise, sampled at step h, stationary std `sd`.
std::vector<double> smooth_noise(int n, double h, double sd, double hz, std::mt19937_64& rng) {
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (sd <= 0.0) return out;
  const double w = 2.0 * M_PI * hz, zeta = 0.7;
  const double sigma = std::sqrt(4.0 * zeta * w * w * w) * sd;
  std::normal_distribution<double> nd;
  double x = sd * nd(rng), v = w * sd * nd(rng);
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = x;
    v += h * (-w * w * x - 2.0 * zeta * w * v) + std::sqrt(h) * sigma * nd(rng);
    x += h * v;
  }
  return out;
}

// bones whose local rotation gets pose noise (spine, neck, head, arms)
const int kJitterJoints[] = {Spine1, Spine2, Spine3, Neck, Head, LCollar, RCollar, LShoulder, RShoulder, LElbow, RElbow};

}  // namespace

const std::vector<std::string>& known_families() {
  static const std::vector<std::string> f = {"idle-sway", "walk-cycle", "squat", "reach", "jump", "sit-stand"};
  return f;
}

MotionClip generate_clip(const std::string& family, double duration, double frame_rate, double shape_range,
                         double position_range, std::uint64_t seed, const kin::Skeleton& skel,
                         const ClipVariation& variation) {
  require(duration > 0.0 && frame_rate > 0.0, ErrorKind::Config, "clip duration and frame rate must be positive");
  require(skel.joint_count() == kin::kJointCount, ErrorKind::Topology, "synthetic motion needs the 22-joint humanoid");
  Params pr{std::mt19937_64(seed)};
  const PoseFn pose_at = make_family(family, pr);

  MotionClip clip;
  clip.generator = family;
  clip.seed = seed;
  clip.frame_rate = frame_rate;
  for (int i = 0; i < kin::kShapeDim; ++i) clip.shape[i] = pr.u(-shape_range, shape_range);
  const double heading0 = pr.u(-M_PI, M_PI);
  const double turn = family == "walk-cycle" ? pr.u(-0.3, 0.3) : pr.u(-0.05, 0.05);
  Vector3d pos(pr.u(-position_range, position_range), pr.u(-position_range, position_range), 0.0);

  const int frames = std::max(1, static_cast<int>(std::lround(duration * frame_rate)));
  const double h = 1.0 / frame_rate;

  // variation draws from its own stream so the base clip stays the same
  std::mt19937_64 vrng(seed ^ 0xa0761d6478bd642fULL);
  require(variation.tempo >= 0.0 && variation.tempo < 0.5 && variation.pose >= 0.0 && variation.bandwidth > 0.0,
          ErrorKind::Config, "clip variation out of range");
  const std::vector<double> rate = smooth_noise(frames, h, variation.tempo, variation.bandwidth, vrng);
  std::vector<std::vector<double>> jitter;
  for (std::size_t k = 0; k < 3 * std::size(kJitterJoints); ++k)
    jitter.push_back(smooth_noise(frames, h, variation.pose, variation.bandwidth, vrng));
  double warped = 0.0;
  const auto& cj = skel.contact_joints;  // toes (L, R), heels (L, R) first
  const double clearance[4] = {0.02, 0.02, 0.07, 0.07};

  kin::JointMat prev_loc;
  for (int t = 0; t < frames; ++t) {
    const double time = t * h;
    if (t > 0) warped += h * (1.0 + rate[static_cast<std::size_t>(t - 1)]);
    Pose p = pose_at(warped);
    if (variation.pose > 0.0)
      for (std::size_t k = 0; k < std::size(kJitterJoints); ++k) {
        const Vector3d d(jitter[3 * k][t], jitter[3 * k + 1][t], jitter[3 * k + 2][t]);
        const int b = kJitterJoints[k] - 1;
        p.theta.row(b) = kin::rotation_log(kin::rodrigues(Vector3d(p.theta.row(b).transpose())) * kin::rodrigues(d)).transpose();
      }
    const Matrix3d rz = kin::rot_z(heading0 + turn * time);
    kin::MotionState s;
    s.theta = p.theta;
    s.phi = kin::rotation_log(rz * p.root_local);
    const kin::JointMat loc =
        kin::forward_kinematics(skel, clip.shape, Vector3d::Zero(), s.phi, s.theta).joints;
    // ground clamp: min(toe_z - 0.02, heel_z - 0.07) = 0
    double low = 1e9;
    for (int k = 0; k < 4; ++k) low = std::min(low, loc(cj[k], 2) - clearance[k]);
    pos.z() = -low + (p.airborne ? p.lift : 0.0);
    if (t > 0) {
      if (p.airborne) {
        pos += h * (rz * p.flight_vel);
        pos.z() = -low + p.lift;
      } else {
        // the lower toe (or both when level) keeps its world xy from the previous frame
        const double zl = loc(cj[0], 2), zr = loc(cj[1], 2);
        Eigen::RowVector3d now, before;
        if (p.stance >= 0) {
          now = loc.row(cj[p.stance]);
          before = prev_loc.row(cj[p.stance]);
        } else if (std::abs(zl - zr) < 0.003) {
          now = 0.5 * (loc.row(cj[0]) + loc.row(cj[1]));
          before = 0.5 * (prev_loc.row(cj[0]) + prev_loc.row(cj[1]));
        } else {
          const int a = zl < zr ? cj[0] : cj[1];
          now = loc.row(a);
          before = prev_loc.row(a);
        }
        pos.x() += before.x() - now.x();
        pos.y() += before.y() - now.y();
      }
    }
    prev_loc = loc;
    s.r = pos;
    kin::refresh_joints(skel, clip.shape, s);
    clip.states.push_back(s);
  }
  kin::fill_velocities(clip.states, h);
  std::vector<kin::JointMat> joints;
  joints.reserve(clip.states.size());
  for (const auto& s : clip.states) joints.push_back(s.joints);
  clip.contacts = kin::annotate_contacts(joints, skel);
  return clip;
}

std::vector<MotionClip> generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec, const kin::Skeleton& skel) {
  struct Job {
    std::string family;
    double duration;
    std::uint64_t seed;
    std::string name;
  };
  std::vector<Job> jobs;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const FamilySpec& fs = spec.families[f];
    require(std::find(known_families().begin(), known_families().end(), fs.family) != known_families().end(),
            ErrorKind::Config, "unknown motion family '" + fs.family + "'");
    require(fs.count >= 0, ErrorKind::Config, "family count must be non-negative");
    for (int i = 0; i < fs.count; ++i) {
      std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(i)};
      std::uint32_t out[2];
      sq.generate(out, out + 2);
      const std::uint64_t s = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
      char name[96];
      std::snprintf(name, sizeof(name), "%s_%03d", fs.family.c_str(), i);
      jobs.push_back({fs.family, fs.duration, s, name});
    }
  }
  std::vector<MotionClip> clips(jobs.size());
  std::vector<std::string> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      clips[i] = generate_clip(jobs[i].family, jobs[i].duration, spec.frame_rate, spec.shape_range,
                               spec.position_range, jobs[i].seed, skel, spec.variation);
      clips[i].name = jobs[i].name;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) require(e.empty(), ErrorKind::Numeric, "synthetic generation failed: " + e);
  return clips;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.frame_rate = j.value("frame_rate", 30.0);
    s.shape_range = j.value("shape_range", 1.0);
    s.position_range = j.value("position_range", 2.0);
    if (j.contains("variation")) {
      const auto& v = j.at("variation");
      s.variation.tempo = v.value("tempo", 0.0);
      s.variation.pose = v.value("pose", 0.0);
      s.variation.bandwidth = v.value("bandwidth", 1.0);
    }
    for (const auto& f : j.at("families"))
      s.families.push_back({f.at("family").get<std::string>(), f.value("count", 1), f.value("duration", 3.0)});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("synthetic spec: ") + e.what());
  }
  return s;
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json fam = nlohmann::json::array();
  for (const auto& f : families) fam.push_back({{"family", f.family}, {"count", f.count}, {"duration", f.duration}});
  return {{"frame_rate", frame_rate},
          {"shape_range", shape_range},
          {"position_range", position_range},
          {"variation", {{"tempo", variation.tempo}, {"pose", variation.pose}, {"bandwidth", variation.bandwidth}}},
          {"families", fam}};
}

}  // namespace motionprior::data
