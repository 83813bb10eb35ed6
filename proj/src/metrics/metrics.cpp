#include "motionprior/metrics/metrics.hpp"

#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace motionprior::metrics {

namespace {

void check_pair(const PointSeq& a, const PointSeq& b) {
  require(!a.empty(), ErrorKind::Precondition, "metrics: empty sequence");
  require(a.size() == b.size(), ErrorKind::LengthMismatch,
          "metrics: sequences have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " frames");
  for (std::size_t t = 0; t < a.size(); ++t)
    require(a[t].rows() == b[t].rows() && a[t].cols() == 3 && b[t].cols() == 3, ErrorKind::DimensionMismatch,
            "metrics: point count mismatch at frame " + std::to_string(t));
}

double frame_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).rowwise().norm().mean();
}

PointSeq marker_positions(const data::MotionClip& clip, const kin::Skeleton& skel) {
  PointSeq out;
  for (const auto& s : clip.states) out.push_back(kin::forward_kinematics(skel, clip.shape, s.r, s.phi, s.theta).markers);
  return out;
}

}  // namespace

PointSeq joint_positions(const data::MotionClip& clip) {
  PointSeq out;
  out.reserve(clip.states.size());
  for (const auto& s : clip.states) out.push_back(s.joints);
  return out;
}

Displacement ade_fde(const PointSeq& pred, const PointSeq& truth) {
  check_pair(pred, truth);
  Displacement d;
  for (std::size_t t = 0; t < pred.size(); ++t) d.ade += frame_error(pred[t], truth[t]);
  d.ade /= static_cast<double>(pred.size());
  d.fde = frame_error(pred.back(), truth.back());
  return d;
}

double apd(const std::vector<PointSeq>& samples) {
  if (samples.size() < 2) return 0.0;
  double sum = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j, ++pairs) sum += ade_fde(samples[i], samples[j]).ade;
  return sum / static_cast<double>(pairs);
}

Eigen::MatrixXd accel(const PointSeq& seq, double h) {
  require(h > 0.0, ErrorKind::Precondition, "accel: h must be positive");
  const int f = static_cast<int>(seq.size());
  if (f < 3) return Eigen::MatrixXd(0, seq.empty() ? 0 : seq[0].rows());
  Eigen::MatrixXd a(f - 2, seq[0].rows());
  for (int t = 1; t + 1 < f; ++t) a.row(t - 1) = ((seq[t - 1] - 2.0 * seq[t] + seq[t + 1]).rowwise().norm() / (h * h)).transpose();
  return a;
}

double mean_accel(const PointSeq& seq, double h) {
  const Eigen::MatrixXd a = accel(seq, h);
  return a.size() == 0 ? 0.0 : a.mean();
}

Penetration penetration_from_heights(const Eigen::MatrixXd& heights, const std::vector<double>& thresholds) {
  require(!thresholds.empty(), ErrorKind::Precondition, "penetration: no thresholds");
  Penetration p;
  const double n = static_cast<double>(heights.size());
  if (heights.size() == 0) {
    p.freq_per_threshold.assign(thresholds.size(), 0.0);
    return p;
  }
  const Eigen::ArrayXXd depth = (-heights.array()).max(0.0);
  for (double th : thresholds) p.freq_per_threshold.push_back((depth > th).count() / n);
  for (double f : p.freq_per_threshold) p.freq += f;
  p.freq /= static_cast<double>(thresholds.size());
  p.dist = depth.sum() / n;
  return p;
}

Eigen::MatrixXd heights_above(const PointSeq& seq, const std::vector<int>& ids, const kin::GroundPlane& ground) {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 0.0;
  if (!ground.is_default()) ground.decompose(Eigen::Vector3d::UnitZ(), n, d);
  Eigen::MatrixXd h(seq.size(), ids.size());
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (std::size_t k = 0; k < ids.size(); ++k) {
      require(ids[k] >= 0 && ids[k] < seq[t].rows(), ErrorKind::Precondition, "penetration: joint id out of range");
      h(t, k) = n.dot(seq[t].row(ids[k]).transpose()) + d;
    }
  return h;
}

Penetration penetration(const PointSeq& joints, const std::vector<int>& toe_ids, const kin::GroundPlane& ground,
                        const std::vector<double>& thresholds) {
  return penetration_from_heights(heights_above(joints, toe_ids, ground), thresholds);
}

double contact_accuracy(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& labels, double cutoff) {
  require(probs.rows() == labels.rows() && probs.cols() == labels.cols(), ErrorKind::DimensionMismatch,
          "contact_accuracy: shape mismatch");
  require(probs.size() > 0, ErrorKind::Precondition, "contact_accuracy: no entries");
  const auto pred = (probs.array() >= cutoff);
  const auto truth = (labels.array() >= 0.5);
  return static_cast<double>((pred == truth).count()) / static_cast<double>(probs.size());
}

PositionalErrors positional_errors(const PointSeq& pred, const PointSeq& truth, const Eigen::MatrixXd& visibility,
                                   const std::vector<int>& leg_ids) {
  check_pair(pred, truth);
  require(visibility.rows() == static_cast<Eigen::Index>(pred.size()) && visibility.cols() == pred[0].rows(),
          ErrorKind::DimensionMismatch, "positional_errors: visibility must be frames x points");
  std::vector<char> is_leg(pred[0].rows(), 0);
  for (int id : leg_ids) {
    require(id >= 0 && id < pred[0].rows(), ErrorKind::Precondition, "positional_errors: leg id out of range");
    is_leg[id] = 1;
  }
  PositionalErrors e;
  double vis = 0.0, occ = 0.0, all = 0.0, legs = 0.0;
  long n_all = 0;
  for (std::size_t t = 0; t < pred.size(); ++t)
    for (Eigen::Index i = 0; i < pred[t].rows(); ++i) {
      const double d = (pred[t].row(i) - truth[t].row(i)).norm();
      all += d;
      ++n_all;
      if (visibility(t, i) != 0.0) {
        vis += d;
        ++e.n_vis;
      } else {
        occ += d;
        ++e.n_occ;
      }
      if (is_leg[i]) {
        legs += d;
        ++e.n_legs;
      }
    }
  e.all = all / n_all;
  e.vis = e.n_vis ? vis / e.n_vis : 0.0;
  e.occ = e.n_occ ? occ / e.n_occ : 0.0;
  e.legs = e.n_legs ? legs / e.n_legs : 0.0;
  return e;
}

double root_aligned_error(const PointSeq& pred, const PointSeq& truth) {
  check_pair(pred, truth);
  double s = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const Eigen::MatrixXd a = pred[t].rowwise() - pred[t].row(0);
    const Eigen::MatrixXd b = truth[t].rowwise() - truth[t].row(0);
    s += frame_error(a, b);
  }
  return s / static_cast<double>(pred.size());
}

std::vector<int> leg_marker_ids(const kin::Skeleton& skel) {
  const std::vector<int> legs = skel.leg_joints();
  std::vector<int> out;
  for (int i = 0; i < skel.marker_count(); ++i)
    if (std::find(legs.begin(), legs.end(), skel.markers[i].joint) != legs.end()) out.push_back(i);
  return out;
}

SequenceReport evaluate_sequence(const EvalInput& in, const kin::Skeleton& skel) {
  constexpr double cm = 100.0;
  SequenceReport r;
  r.name = in.name.empty() ? in.truth.name : in.name;
  const PointSeq truth = joint_positions(in.truth);
  const double h = in.truth.frame_time();
  r.accel_truth = mean_accel(truth, h);

  if (!in.samples.empty()) {
    std::vector<PointSeq> seqs;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : in.samples) {
      seqs.push_back(joint_positions(s));
      const Displacement d = ade_fde(seqs.back(), truth);
      if (d.ade < best) {
        best = d.ade;
        r.ade = d.ade * cm;
        r.fde = d.fde * cm;
      }
    }
    r.apd = apd(seqs) * cm;
  }

  if (in.pred) {
    const PointSeq pred = joint_positions(*in.pred);
    require(pred.size() == truth.size(), ErrorKind::LengthMismatch, "eval: prediction and truth lengths differ");
    r.accel = mean_accel(pred, in.pred->frame_time());
    const Penetration p = penetration(pred, {skel.contact_joints[0], skel.contact_joints[1]}, in.ground);
    r.pen_freq = p.freq;
    r.pen_dist = p.dist * cm;
    r.root_aligned = root_aligned_error(pred, truth) * cm;
    if (in.points_are_markers) {
      const PointSeq pm = marker_positions(*in.pred, skel);
      const PointSeq tm = marker_positions(in.truth, skel);
      const Eigen::MatrixXd vis = in.visibility ? *in.visibility : Eigen::MatrixXd::Ones(pm.size(), skel.marker_count());
      const PositionalErrors e = positional_errors(pm, tm, vis, leg_marker_ids(skel));
      r.pos_vis = e.vis * cm;
      r.pos_occ = e.occ * cm;
      r.pos_all = e.all * cm;
      r.pos_legs = e.legs * cm;
    } else {
      const Eigen::MatrixXd vis = in.visibility ? *in.visibility : Eigen::MatrixXd::Ones(pred.size(), kin::kJointCount);
      const PositionalErrors e = positional_errors(pred, truth, vis, skel.leg_joints());
      r.pos_vis = e.vis * cm;
      r.pos_occ = e.occ * cm;
      r.pos_all = e.all * cm;
      r.pos_legs = e.legs * cm;
    }
  }
  if (in.contact_probs) r.contact_acc = contact_accuracy(*in.contact_probs, in.truth.contacts);
  return r;
}

EvalReport evaluate(const std::vector<EvalInput>& inputs, const kin::Skeleton& skel) {
  EvalReport rep;
  for (const auto& in : inputs) rep.sequences.push_back(evaluate_sequence(in, skel));
  rep.finalize();
  return rep;
}

namespace {

using Field = std::optional<double> SequenceReport::*;

const std::vector<std::pair<const char*, Field>>& fields() {
  static const std::vector<std::pair<const char*, Field>> f{
      {"ade_cm", &SequenceReport::ade},
      {"fde_cm", &SequenceReport::fde},
      {"apd_cm", &SequenceReport::apd},
      {"accel", &SequenceReport::accel},
      {"accel_truth", &SequenceReport::accel_truth},
      {"pen_freq", &SequenceReport::pen_freq},
      {"pen_dist_cm", &SequenceReport::pen_dist},
      {"contact_acc", &SequenceReport::contact_acc},
      {"pos_vis_cm", &SequenceReport::pos_vis},
      {"pos_occ_cm", &SequenceReport::pos_occ},
      {"pos_all_cm", &SequenceReport::pos_all},
      {"pos_legs_cm", &SequenceReport::pos_legs},
      {"root_aligned_cm", &SequenceReport::root_aligned},
  };
  return f;
}

nlohmann::json seq_json(const SequenceReport& s) {
  nlohmann::json j;
  j["name"] = s.name;
  for (const auto& [key, f] : fields()) j[key] = (s.*f) ? nlohmann::json(*(s.*f)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

void EvalReport::finalize() {
  aggregate = SequenceReport{};
  aggregate.name = "mean";
  for (const auto& [key, f] : fields()) {
    double s = 0.0;
    int n = 0;
    for (const auto& q : sequences)
      if (q.*f) {
        s += *(q.*f);
        ++n;
      }
    if (n) aggregate.*f = s / n;
  }
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["aggregate"] = seq_json(aggregate);
  j["sequences"] = nlohmann::json::array();
  for (const auto& s : sequences) j["sequences"].push_back(seq_json(s));
  j["units"] = {{"positions", "cm"}, {"accel", "m/s^2"}, {"pen_freq", "fraction, mean over 0-15 cm thresholds"}};
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "name";
  for (const auto& [key, f] : fields()) os << ',' << key;
  os << '\n';
  auto row = [&](const SequenceReport& s) {
    os << s.name;
    for (const auto& [key, f] : fields()) {
      os << ',';
      if (s.*f) os << *(s.*f);
    }
    os << '\n';
  };
  for (const auto& s : sequences) row(s);
  row(aggregate);
  return os.str();
}

void EvalReport::save(const std::string& json_path, const std::string& csv_path) const {
  if (!json_path.empty()) {
    std::ofstream f(json_path);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + json_path);
    f << to_json().dump(2) << '\n';
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + csv_path);
    f << to_csv();
  }
}

}  // namespace motionprior::metrics
