#include "motionprior/data/synthetic.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/metrics/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace motionprior;
using namespace motionprior::metrics;

namespace {

PointSeq random_seq(std::mt19937_64& rng, int frames, int points, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  PointSeq s;
  for (int t = 0; t < frames; ++t) {
    Eigen::MatrixXd p(points, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = nd(rng);
    s.push_back(p);
  }
  return s;
}

PointSeq offset(const PointSeq& s, const Eigen::Vector3d& d) {
  PointSeq o = s;
  for (auto& p : o) p.rowwise() += d.transpose();
  return o;
}

PointSeq permute(const PointSeq& s, const std::vector<int>& perm) {
  PointSeq o = s;
  for (std::size_t t = 0; t < s.size(); ++t)
    for (std::size_t i = 0; i < perm.size(); ++i) o[t].row(i) = s[t].row(perm[i]);
  return o;
}

const kin::Skeleton& skel() { return kin::Skeleton::default_humanoid(); }

}  // namespace

TEST_CASE("displacement error examples") {
  std::mt19937_64 rng(1);
  const PointSeq a = random_seq(rng, 6, 5);
  Displacement d = ade_fde(a, a);
  CHECK(d.ade == 0.0);
  CHECK(d.fde == 0.0);
  d = ade_fde(offset(a, {0.0, 0.01, 0.0}), a);
  CHECK(d.ade == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(d.fde == doctest::Approx(0.01).epsilon(1e-12));
  PointSeq two(2, Eigen::MatrixXd::Zero(4, 3));
  PointSeq moved = two;
  moved[0].col(0).setConstant(0.01);
  moved[1].col(2).setConstant(-0.03);
  d = ade_fde(moved, two);
  CHECK(d.ade == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(d.fde == doctest::Approx(0.03).epsilon(1e-12));
  CHECK_THROWS_AS(ade_fde(two, a), Error);
}

TEST_CASE("average pairwise distance") {
  std::mt19937_64 rng(2);
  const PointSeq a = random_seq(rng, 4, 6);
  CHECK(apd({a, a, a}) == 0.0);
  CHECK(apd({a, offset(a, {0.0, 0.0, 0.02})}) == doctest::Approx(0.02).epsilon(1e-12));
  const PointSeq b = random_seq(rng, 4, 6), c = random_seq(rng, 4, 6);
  const double abc = apd({a, b, c});
  CHECK(apd({c, a, b}) == doctest::Approx(abc).epsilon(1e-14));
  CHECK(apd({b, c, a}) == doctest::Approx(abc).epsilon(1e-14));
  const double oracle = (ade_fde(a, b).ade + ade_fde(a, c).ade + ade_fde(b, c).ade) / 3.0;
  CHECK(abc == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(apd({a}) == 0.0);
}

TEST_CASE("acceleration examples") {
  const double h = 1.0 / 30.0;
  PointSeq still(5, Eigen::MatrixXd::Constant(3, 3, 0.4));
  CHECK(accel(still, h).cwiseAbs().maxCoeff() == 0.0);
  PointSeq line;
  for (int t = 0; t < 6; ++t) line.push_back(Eigen::MatrixXd::Constant(2, 3, 0.25 * t));
  CHECK(accel(line, h).maxCoeff() < 1e-9);
  PointSeq bump(3, Eigen::MatrixXd::Zero(1, 3));
  bump[2](0, 2) = h * h;
  CHECK(accel(bump, h)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // quadratic in time: constant magnitude
  PointSeq quad;
  for (int t = 0; t < 8; ++t) {
    Eigen::MatrixXd p(2, 3);
    p << 0.5 * 3.0 * t * t * h * h, 0.0, 1.0, 0.0, -0.5 * t * t * h * h, 0.1 * t;
    quad.push_back(p);
  }
  const Eigen::MatrixXd qa = accel(quad, h);
  CHECK(qa.rows() == 6);
  CHECK((qa.col(0).array() - 3.0).abs().maxCoeff() < 1e-6);
  CHECK((qa.col(1).array() - 1.0).abs().maxCoeff() < 1e-6);
  CHECK(mean_accel(PointSeq(2, Eigen::MatrixXd::Zero(1, 3))) == 0.0);
}

TEST_CASE("acceleration equals a brute-force oracle on 1000 random cases") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> nf(3, 12), np(1, 6);
  for (int c = 0; c < 1000; ++c) {
    const int f = nf(rng), p = np(rng);
    const double h = 1.0 / (10.0 + c % 50);
    const PointSeq s = random_seq(rng, f, p);
    const Eigen::MatrixXd a = accel(s, h);
    double pooled = 0.0;
    for (int t = 1; t < f - 1; ++t)
      for (int i = 0; i < p; ++i) {
        double sq = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double dd = (s[t - 1](i, k) - 2.0 * s[t](i, k) + s[t + 1](i, k)) / (h * h);
          sq += dd * dd;
        }
        REQUIRE(a(t - 1, i) == doctest::Approx(std::sqrt(sq)).epsilon(1e-13));
        pooled += std::sqrt(sq);
      }
    REQUIRE(mean_accel(s, h) == doctest::Approx(pooled / ((f - 2) * p)).epsilon(1e-12));
  }
}

TEST_CASE("penetration examples") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(10, 2, 0.02);
  Penetration p = penetration_from_heights(h);
  CHECK(p.freq == 0.0);
  CHECK(p.dist == 0.0);
  h(4, 1) = -0.05;
  p = penetration_from_heights(h);
  REQUIRE(p.freq_per_threshold.size() == 6);
  CHECK(p.freq_per_threshold[0] == doctest::Approx(1.0 / 20.0));
  CHECK(p.freq_per_threshold[1] == doctest::Approx(1.0 / 20.0));
  for (int k = 2; k < 6; ++k) CHECK(p.freq_per_threshold[k] == 0.0);
  CHECK(p.freq == doctest::Approx(2.0 / 120.0).epsilon(1e-12));
  CHECK(p.dist == doctest::Approx(0.0025).epsilon(1e-12));
  // exactly at a threshold does not count
  h(4, 1) = -0.03;
  p = penetration_from_heights(h, {0.03});
  CHECK(p.freq == 0.0);
  p = penetration_from_heights(h, {0.029999});
  CHECK(p.freq == doctest::Approx(1.0 / 20.0));
  // a plane two cm above the origin floor
  PointSeq feet(3, Eigen::MatrixXd::Zero(2, 3));
  const Penetration q = penetration(feet, {0, 1}, kin::GroundPlane::from_normal_offset(Eigen::Vector3d::UnitZ(), -0.02));
  CHECK(q.freq_per_threshold[0] == 1.0);
  CHECK(q.dist == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("penetration equals a brute-force recount on 1000 random cases") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> nf(1, 40);
  std::normal_distribution<double> nd(0.02, 0.06);
  const std::vector<double> th{0.0, 0.03, 0.06, 0.09, 0.12, 0.15};
  for (int c = 0; c < 1000; ++c) {
    const int f = nf(rng);
    Eigen::MatrixXd h(f, 2);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = nd(rng);
    if (c % 7 == 0) h(0, 0) = -0.06;  // exact threshold hit
    const Penetration p = penetration_from_heights(h);
    double freq = 0.0, dist = 0.0;
    for (double g : th) {
      int n = 0;
      for (int t = 0; t < f; ++t)
        for (int k = 0; k < 2; ++k)
          if (-h(t, k) > g) ++n;
      freq += static_cast<double>(n) / (2.0 * f);
    }
    freq /= 6.0;
    for (int t = 0; t < f; ++t)
      for (int k = 0; k < 2; ++k)
        if (h(t, k) < 0.0) dist += -h(t, k);
    dist /= 2.0 * f;
    REQUIRE(p.freq == doctest::Approx(freq).epsilon(1e-14));
    REQUIRE(p.dist == doctest::Approx(dist).epsilon(1e-14));
    REQUIRE(p.freq >= 0.0);
    REQUIRE(p.freq <= 1.0);
  }
}

TEST_CASE("contact accuracy examples") {
  Eigen::MatrixXd labels(2, 4);
  labels << 1, 0, 1, 0, 0, 1, 0, 1;
  CHECK(contact_accuracy(labels, labels) == 1.0);
  CHECK(contact_accuracy(Eigen::MatrixXd::Ones(2, 4) - labels, labels) == 0.0);
  CHECK(contact_accuracy(Eigen::MatrixXd::Constant(2, 4, 0.5), labels) == 0.5);
  CHECK(contact_accuracy(Eigen::MatrixXd::Constant(2, 4, 0.4999), labels) == 0.5);
  CHECK_THROWS_AS(contact_accuracy(Eigen::MatrixXd::Ones(3, 4), labels), Error);
}

TEST_CASE("positional error examples") {
  PointSeq truth(3, Eigen::MatrixXd::Zero(5, 3));
  Eigen::MatrixXd vis = Eigen::MatrixXd::Ones(3, 5);
  PositionalErrors e = positional_errors(truth, truth, vis, {1, 2});
  CHECK(e.vis == 0.0);
  CHECK(e.occ == 0.0);
  CHECK(e.all == 0.0);
  CHECK(e.legs == 0.0);
  PointSeq pred = truth;
  pred[1](3, 0) = 0.02;
  vis(1, 3) = 0.0;
  e = positional_errors(pred, truth, vis, {1, 2});
  CHECK(e.occ == doctest::Approx(0.02));
  CHECK(e.vis == 0.0);
  CHECK(e.n_occ == 1);
  CHECK(e.n_vis == 14);
  // mixed: point 1 (leg, visible) off by 3 cm in every frame, point 4 occluded in frame 0 off by 4 cm
  pred = truth;
  for (auto& p : pred) p(1, 1) = 0.03;
  pred[0](4, 2) = 0.04;
  vis.setOnes();
  vis(0, 4) = 0.0;
  e = positional_errors(pred, truth, vis, {1, 2});
  CHECK(e.vis == doctest::Approx(0.09 / 14.0));
  CHECK(e.occ == doctest::Approx(0.04));
  CHECK(e.all == doctest::Approx(0.13 / 15.0));
  CHECK(e.legs == doctest::Approx(0.09 / 6.0));
  // consistent permutation of points leaves every value unchanged
  const std::vector<int> perm{4, 2, 0, 3, 1};
  Eigen::MatrixXd pvis(3, 5);
  for (int i = 0; i < 5; ++i) pvis.col(i) = vis.col(perm[i]);
  const PositionalErrors ep = positional_errors(permute(pred, perm), permute(truth, perm), pvis, {4, 1});
  CHECK(ep.vis == doctest::Approx(e.vis));
  CHECK(ep.occ == doctest::Approx(e.occ));
  CHECK(ep.all == doctest::Approx(e.all));
  CHECK(ep.legs == doctest::Approx(e.legs));
}

TEST_CASE("metrics are invariant to joint permutations") {
  std::mt19937_64 rng(5);
  const PointSeq a = random_seq(rng, 7, 6), b = random_seq(rng, 7, 6);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const PointSeq pa = permute(a, perm), pb = permute(b, perm);
  CHECK(ade_fde(pa, pb).ade == doctest::Approx(ade_fde(a, b).ade).epsilon(1e-14));
  CHECK(ade_fde(pa, pb).fde == doctest::Approx(ade_fde(a, b).fde).epsilon(1e-14));
  CHECK(apd({pa, pb}) == doctest::Approx(apd({a, b})).epsilon(1e-14));
  CHECK(mean_accel(pa) == doctest::Approx(mean_accel(a)).epsilon(1e-14));
  std::vector<int> toes{0, 3}, ptoes;
  for (int t : toes) ptoes.push_back(static_cast<int>(std::find(perm.begin(), perm.end(), t) - perm.begin()));
  const Penetration p1 = penetration(a, toes, {}), p2 = penetration(pa, ptoes, {});
  CHECK(p1.freq == p2.freq);
  CHECK(p1.dist == doctest::Approx(p2.dist).epsilon(1e-14));
}

TEST_CASE("root-aligned error removes a global translation") {
  std::mt19937_64 rng(6);
  const PointSeq a = random_seq(rng, 4, 5);
  CHECK(root_aligned_error(offset(a, {1.0, -2.0, 0.3}), a) < 1e-12);
  CHECK(ade_fde(offset(a, {1.0, -2.0, 0.3}), a).ade > 1.0);
}

TEST_CASE("sequence evaluation of the truth against itself") {
  const data::MotionClip clip = data::generate_clip("walk-cycle", 1.0, 30.0, 1.0, 2.0, 31, skel());
  EvalInput in;
  in.truth = clip;
  in.pred = clip;
  in.samples = {clip, clip};
  in.contact_probs = clip.contacts;
  in.points_are_markers = true;
  Eigen::MatrixXd vis = Eigen::MatrixXd::Ones(clip.frame_count(), skel().marker_count());
  vis.col(0).setZero();
  in.visibility = vis;
  const EvalReport rep = evaluate({in}, skel());
  const SequenceReport& s = rep.sequences.at(0);
  CHECK(*s.ade == 0.0);
  CHECK(*s.fde == 0.0);
  CHECK(*s.apd == 0.0);
  CHECK(*s.pos_vis == 0.0);
  CHECK(*s.pos_occ == 0.0);
  CHECK(*s.pos_all == 0.0);
  CHECK(*s.pos_legs == 0.0);
  CHECK(*s.root_aligned == 0.0);
  CHECK(*s.contact_acc == 1.0);
  CHECK(*s.accel == doctest::Approx(*s.accel_truth));
  CHECK(*s.pen_freq >= 0.0);
  CHECK(*rep.aggregate.ade == 0.0);

  // occluded markers carry the only error
  EvalInput shifted = in;
  shifted.samples.clear();
  shifted.contact_probs.reset();
  data::MotionClip moved = clip;
  for (auto& st : moved.states) {
    st.r.z() += 0.01;
    st.joints.col(2).array() += 0.01;
  }
  shifted.pred = moved;
  Eigen::MatrixXd half = Eigen::MatrixXd::Ones(clip.frame_count(), skel().marker_count());
  half.leftCols(10).setZero();
  shifted.visibility = half;
  const SequenceReport t = evaluate_sequence(shifted, skel());
  CHECK(*t.pos_occ == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*t.pos_vis == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*t.root_aligned < 1e-9);
  CHECK_FALSE(t.ade.has_value());
  CHECK_FALSE(t.contact_acc.has_value());
}

TEST_CASE("report lists every field in JSON and CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "mp_metrics_io";
  std::filesystem::create_directories(dir);
  EvalReport rep;
  SequenceReport a;
  a.name = "a";
  a.ade = 2.0;
  a.pen_freq = 0.1;
  SequenceReport b;
  b.name = "b";
  b.ade = 4.0;
  rep.sequences = {a, b};
  rep.finalize();
  CHECK(*rep.aggregate.ade == 3.0);
  CHECK(*rep.aggregate.pen_freq == 0.1);
  CHECK_FALSE(rep.aggregate.contact_acc.has_value());
  rep.save((dir / "r.json").string(), (dir / "r.csv").string());
  std::ifstream jf(dir / "r.json");
  const auto j = nlohmann::json::parse(jf);
  for (const char* k : {"ade_cm", "fde_cm", "apd_cm", "accel", "accel_truth", "pen_freq", "pen_dist_cm", "contact_acc",
                        "pos_vis_cm", "pos_occ_cm", "pos_all_cm", "pos_legs_cm", "root_aligned_cm"}) {
    CHECK(j["aggregate"].contains(k));
    CHECK(j["sequences"][0].contains(k));
  }
  CHECK(j["sequences"][1]["pen_freq"].is_null());
  const std::string csv = rep.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("name,ade_cm,fde_cm", 0) == 0);
  std::filesystem::remove_all(dir);
}
