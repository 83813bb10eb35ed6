#include "motionprior/diff/ops.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kin/canonical.hpp"
#include "motionprior/kin/fk.hpp"
#include "motionprior/kin/geom_ops.hpp"
#include "motionprior/kin/ground.hpp"
#include "motionprior/kin/motion.hpp"
#include "motionprior/kin/rotation.hpp"

#include <doctest.h>

#include <random>

using namespace motionprior;
using namespace motionprior::kin;
using diff::Mat;
using diff::Vec;

namespace {

const Skeleton& skel() { return Skeleton::default_humanoid(); }

MotionState random_state(std::mt19937& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MotionState s;
  for (int a = 0; a < 3; ++a) {
    s.r[a] = nd(rng);
    s.r_dot[a] = nd(rng);
    s.phi[a] = 0.7 * nd(rng);
    s.phi_dot[a] = nd(rng);
  }
  for (int k = 0; k < kBoneCount; ++k)
    for (int a = 0; a < 3; ++a) s.theta(k, a) = 0.4 * nd(rng);
  for (int j = 0; j < kJointCount; ++j)
    for (int a = 0; a < 3; ++a) {
      s.joints(j, a) = nd(rng);
      s.joints_dot(j, a) = nd(rng);
    }
  return s;
}

Eigen::VectorXd zero_beta() { return Eigen::VectorXd::Zero(kShapeDim); }

}  // namespace

TEST_CASE("shipped skeleton file matches the built-in humanoid") {
  const Skeleton file = Skeleton::load(std::string(MOTIONPRIOR_DATA_DIR) + "/skeleton.json");
  CHECK(file.hash() == skel().hash());
  CHECK(file.marker_count() == kDefaultMarkerCount);
  CHECK(file.joint_count() == kJointCount);
}

TEST_CASE("skeleton validation rejects bad topology") {
  Skeleton s = skel();
  s.parents[5] = 7;
  CHECK_THROWS_AS(s.validate(), Error);
  Skeleton t = skel();
  t.contact_joints[1] = t.contact_joints[0];
  CHECK_THROWS_AS(t.validate(), Error);
  Skeleton u = skel();
  u.rest_offsets[3].setZero();
  CHECK_THROWS_AS(u.validate(), Error);
}

TEST_CASE("fk at zero pose gives cumulative rest offsets") {
  const auto out = forward_kinematics(skel(), zero_beta(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                      PoseMat::Zero());
  for (int j = 0; j < kJointCount; ++j) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int k = j; k > 0; k = skel().parents[k]) c += skel().rest_offsets[k];
    CHECK((out.joints.row(j).transpose() - c).norm() < 1e-12);
  }
  // toes at 0.02 and ankles at 0.07 below a 0.93 pelvis
  CHECK(out.joints(10, 2) == doctest::Approx(-0.91));
  CHECK(out.joints(7, 2) == doctest::Approx(-0.86));
}

TEST_CASE("fk of a 2-joint chain rotated 90 degrees about z") {
  Skeleton s;
  s.parents = {-1, 0};
  s.rest_offsets = {Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0)};
  s.shape_basis = Eigen::MatrixXd::Zero(1, kShapeDim);
  s.contact_joints = {0, 1, 0, 0, 0, 0, 0, 0};
  const Eigen::Vector3d r(0.5, 0.2, -0.1);
  diff::Mat rr(1, 3), root(1, 9), pose(1, 9), beta = diff::Mat::Zero(1, kShapeDim);
  rr << r.x(), r.y(), r.z();
  const Eigen::Matrix3d rz = rot_z(M_PI / 2);
  for (int a = 0; a < 9; ++a) root(0, a) = rz(a / 3, a % 3);
  pose << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Mat joints, markers, globals;
  kernels::fk_forward(s, rr, root, pose, beta, joints, markers, globals, kernels::Exec::Serial);
  CHECK(joints(0, 3) == doctest::Approx(r.x() - 1.0));
  CHECK(joints(0, 4) == doctest::Approx(r.y()).epsilon(1e-12));
  CHECK(joints(0, 5) == doctest::Approx(r.z()));
}

TEST_CASE("fk is equivariant to yaw and translation") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    MotionState s = random_state(rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Random(kShapeDim) * 0.5;
    const auto base = forward_kinematics(skel(), beta, s.r, s.phi, s.theta);
    const double yaw = u(rng);
    const Eigen::Vector3d shift(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d rz = rot_z(yaw);
    const Eigen::Vector3d phi2 = rotation_log(rz * rodrigues(s.phi));
    const auto moved = forward_kinematics(skel(), beta, rz * s.r + shift, phi2, s.theta);
    for (int j = 0; j < kJointCount; ++j) {
      const Eigen::Vector3d expect = rz * base.joints.row(j).transpose() + shift;
      CHECK((moved.joints.row(j).transpose() - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("zero shape reproduces rest bone lengths") {
  const Eigen::VectorXd l = skel().bone_lengths(zero_beta());
  for (int k = 0; k < kBoneCount; ++k) CHECK(l[k] == doctest::Approx(skel().rest_offsets[k + 1].norm()));
}

TEST_CASE("rotation log inverts rodrigues across the range") {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d axis(nd(rng), nd(rng), nd(rng));
    axis.normalize();
    const double ang = (i < 20) ? M_PI - 1e-7 * i : std::fmod(std::abs(nd(rng)) * 1.5, M_PI - 1e-3);
    const Eigen::Vector3d v = axis * ang;
    const Eigen::Vector3d w = rotation_log(rodrigues(v));
    CHECK((rodrigues(w) - rodrigues(v)).norm() < 1e-9);
    CHECK(w.norm() <= M_PI + 1e-12);
  }
  CHECK(rotation_log(Eigen::Matrix3d::Identity()).norm() == 0.0);
}

TEST_CASE("canonicalize examples") {
  MotionState s;
  s.r = Eigen::Vector3d(0, 0, 0.9);
  auto [c0, tf0] = canonicalize(s);
  CHECK(tf0.yaw == doctest::Approx(0.0));
  CHECK(tf0.shift_xy.norm() == doctest::Approx(0.0));

  MotionState f;
  f.r = Eigen::Vector3d(2, 3, 1);
  f.phi = Eigen::Vector3d(0, 0, M_PI / 2);  // facing -x
  refresh_joints(skel(), zero_beta(), f);
  auto [c, tf] = canonicalize(f);
  CHECK(tf.shift_xy.x() == doctest::Approx(-2.0));
  CHECK(tf.shift_xy.y() == doctest::Approx(-3.0));
  CHECK(c.r.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.r.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.r.z() == doctest::Approx(1.0));
  const Eigen::Vector3d right = rodrigues(c.phi).col(0);
  CHECK(std::abs(right.y()) < 1e-12);
  CHECK(right.x() > 0.0);
}

TEST_CASE("canonicalize round trip and consistency with fk") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    MotionState s = random_state(rng);
    auto [c, tf] = canonicalize(s);
    CHECK(std::abs(c.r.x()) < 1e-12);
    CHECK(std::abs(c.r.y()) < 1e-12);
    CHECK(c.r.z() == doctest::Approx(s.r.z()));
    const Eigen::Vector3d right = rodrigues(c.phi).col(0);
    CHECK(std::abs(right.y()) < 1e-9);
    CHECK(right.x() >= 0.0);
    const MotionState back = uncanonicalize(c, tf);
    CHECK((back.to_vector() - s.to_vector()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("degenerate orientation falls back to yaw 0") {
  MotionState s;
  s.phi = Eigen::Vector3d(0, -M_PI / 2, 0);  // root +x axis onto +z
  auto [c, tf] = canonicalize(s);
  CHECK(tf.degenerate);
  CHECK(tf.yaw == 0.0);
}

TEST_CASE("feature form round trip") {
  std::mt19937 rng(9);
  MotionState s = random_state(rng);
  const MotionState b = MotionState::from_features(s.to_features());
  CHECK((b.to_vector() - s.to_vector()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(MotionState::from_vector(Eigen::VectorXd::Zero(10)), Error);
}

TEST_CASE("feature rigid transform matches the state transform") {
  std::mt19937 rng(10);
  MotionState s = random_state(rng);
  auto [c, tf] = canonicalize(s);
  Mat f(1, feature_layout::kSize);
  f.row(0) = s.to_features().transpose();
  const Mat p = canonical_params(f);
  const Mat y = rigid_apply(f, p, feature_rigid_layout(), false);
  const MotionState viaf = MotionState::from_features(y.row(0).transpose());
  CHECK((viaf.to_vector() - c.to_vector()).cwiseAbs().maxCoeff() < 1e-9);
  const Mat back = rigid_apply(y, p, feature_rigid_layout(), true);
  CHECK((back - f).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite difference velocity examples") {
  Eigen::MatrixXd p(3, 1);
  p << 0.0, 0.1, 0.3;
  const Eigen::MatrixXd v = finite_difference_velocities(p, 1.0 / 30.0);
  CHECK(v(0, 0) == doctest::Approx(3.0));
  CHECK(v(1, 0) == doctest::Approx(3.0));
  CHECK(v(2, 0) == doctest::Approx(6.0));
  Eigen::MatrixXd lin(5, 3);
  for (int t = 0; t < 5; ++t) lin.row(t) << t / 30.0, 0.0, 0.0;
  const Eigen::MatrixXd vl = finite_difference_velocities(lin, 1.0 / 30.0);
  for (int t = 0; t < 5; ++t) CHECK(vl(t, 0) == doctest::Approx(1.0));
  CHECK(finite_difference_velocities(Eigen::MatrixXd::Ones(4, 2)).norm() == 0.0);
  CHECK(finite_difference_velocities(Eigen::MatrixXd::Ones(1, 2)).norm() == 0.0);
}

TEST_CASE("contact annotation thresholds") {
  std::vector<JointMat> seq(2, JointMat::Constant(1.0));
  // heel: 0.4 cm step at 5 cm height
  seq[0].row(7) << 0.0, 0.0, 0.05;
  seq[1].row(7) << 0.004, 0.0, 0.05;
  // toe: 0.1 cm step at 5 cm height
  seq[0].row(10) << 0.0, 0.0, 0.05;
  seq[1].row(10) << 0.001, 0.0, 0.05;
  const Eigen::MatrixXd c = annotate_contacts(seq, skel());
  CHECK(c(1, 2) == 1.0);
  CHECK(c(1, 0) == 0.0);
  CHECK(c(0, 2) == 1.0);
  std::vector<JointMat> high(4, JointMat::Constant(1.0));
  CHECK(annotate_contacts(high, skel()).sum() == 0.0);
}

TEST_CASE("contact annotation is invariant to yaw and xy shift") {
  std::vector<JointMat> seq;
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  JointMat j = JointMat::Zero();
  for (int t = 0; t < 30; ++t) {
    for (int r = 0; r < kJointCount; ++r) j.row(r) += Eigen::RowVector3d(u(rng) * 0.06, 0.0, 0.0);
    for (int r = 0; r < kJointCount; ++r) j(r, 2) = u(rng);
    seq.push_back(j);
  }
  const Eigen::Matrix3d rz = rot_z(1.1);
  std::vector<JointMat> moved = seq;
  for (auto& m : moved)
    for (int r = 0; r < kJointCount; ++r)
      m.row(r) = (rz * m.row(r).transpose() + Eigen::Vector3d(3.0, -2.0, 0.0)).transpose();
  CHECK(annotate_contacts(seq, skel()) == annotate_contacts(moved, skel()));
}

namespace {

// FK joints + markers contracted with fixed weights, as a function of (r, phi, theta, beta).
diff::DiffFunction fk_energy(const Mat& wj, const Mat& wm) {
  return [wj, wm](const Vec& x, Vec* grad) {
    diff::Tape t;
    Var v = t.variable(Mat(Eigen::Map<const Mat>(x.data(), 1, x.size())));
    Var r = diff::slice_cols(v, 0, 3);
    Var phi = diff::slice_cols(v, 3, 3);
    Var theta = diff::slice_cols(v, 6, 63);
    Var beta = diff::slice_cols(v, 69, kShapeDim);
    FkVars fk = fk_op(skel(), r, rodrigues_op(phi), rodrigues_op(theta), beta);
    Var e = diff::add(diff::sum(diff::mul(fk.joints, t.constant(wj))),
                      diff::sum(diff::mul(fk.markers, t.constant(wm))));
    if (grad) {
      t.backward(e);
      Mat g = t.grad(v);
      *grad = Eigen::Map<const Vec>(g.data(), g.size());
    }
    return e.value()(0, 0);
  };
}

}  // namespace

TEST_CASE("fk gradient matches finite differences") {
  std::mt19937 rng(21);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mat wj(1, 66), wm(1, 3 * kDefaultMarkerCount);
    for (int i = 0; i < wj.cols(); ++i) wj(0, i) = nd(rng);
    for (int i = 0; i < wm.cols(); ++i) wm(0, i) = nd(rng);
    Vec x(69 + kShapeDim);
    for (int i = 0; i < x.size(); ++i) x[i] = (i < 69 ? 0.6 : 0.8) * nd(rng);
    worst = std::max(worst, diff::grad_check(fk_energy(wj, wm), x).max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("geometric op gradients") {
  std::mt19937 rng(22);
  std::normal_distribution<double> nd;
  auto rand_mat = [&](int r, int c, double s) {
    Mat m(r, c);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = s * nd(rng);
    return m;
  };
  const Mat w = rand_mat(2, feature_layout::kSize, 1.0);
  // canonicalize + uncanonicalize of feature rows w.r.t. the rows themselves
  auto canon = [&](const Vec& x, Vec* grad) {
    diff::Tape t;
    Var f = t.variable(Mat(Eigen::Map<const Mat>(x.data(), 2, feature_layout::kSize)));
    Var p = canonical_params_op(f);
    Var c = rigid_transform_op(f, p, feature_rigid_layout(), false);
    Var shifted = diff::add_scalar(c, 0.1);
    Var back = rigid_transform_op(shifted, p, feature_rigid_layout(), true);
    Var e = diff::add(diff::sum(diff::mul(c, t.constant(w))), diff::sum(diff::square(back)));
    if (grad) {
      t.backward(e);
      Mat g = t.grad(f);
      *grad = Eigen::Map<const Vec>(g.data(), g.size());
    }
    return e.value()(0, 0);
  };
  Mat f0 = rand_mat(2, feature_layout::kSize, 1.0);
  for (int i = 0; i < 2; ++i) {
    MotionState s = random_state(rng);
    f0.row(i) = s.to_features().transpose();
  }
  CHECK(diff::grad_check(canon, Eigen::Map<const Vec>(f0.data(), f0.size())).max_rel_error < 1e-6);

  auto logf = [&](const Vec& x, Vec* grad) {
    diff::Tape t;
    Var a = t.variable(Mat(Eigen::Map<const Mat>(x.data(), 2, 6)));
    Var rm = rotmat_mul_op(rodrigues_op(a), rodrigues_op(diff::scale(a, -0.3)));
    Var l = rotation_log_op(rm);
    Var e = diff::sum(diff::mul(l, t.constant(rand_mat(2, 6, 1.0) * 0 + Mat::Constant(2, 6, 0.7))));
    Var bl = diff::sum(diff::square(l));
    e = diff::add(e, bl);
    if (grad) {
      t.backward(e);
      Mat g = t.grad(a);
      *grad = Eigen::Map<const Vec>(g.data(), g.size());
    }
    return e.value()(0, 0);
  };
  const Mat a0 = rand_mat(2, 6, 0.8);
  CHECK(diff::grad_check(logf, Eigen::Map<const Vec>(a0.data(), a0.size())).max_rel_error < 1e-6);

  auto groundf = [&](const Vec& x, Vec* grad) {
    diff::Tape t;
    Var g = t.variable(Mat(Eigen::Map<const Mat>(x.data(), 1, 3)));
    Var p = ground_params_op(g, Eigen::Vector3d(0, -1, 0));
    Var pts = t.constant(rand_mat(4, 9, 0.0).array() + 0.3);
    Var y = rigid_transform_op(pts, p, points_layout(3), false);
    Var e = diff::sum(diff::square(y));
    if (grad) {
      t.backward(e);
      Mat gg = t.grad(g);
      *grad = Eigen::Map<const Vec>(gg.data(), gg.size());
    }
    return e.value()(0, 0);
  };
  Vec g0(3);
  g0 << 0.1, -1.4, 0.3;
  CHECK(diff::grad_check(groundf, g0).max_rel_error < 1e-6);

  auto bonef = [&](const Vec& x, Vec* grad) {
    diff::Tape t;
    Var j = t.variable(Mat(Eigen::Map<const Mat>(x.data(), 2, 66)));
    Var e = diff::sum(diff::square(bone_lengths_op(skel(), j)));
    if (grad) {
      t.backward(e);
      Mat gg = t.grad(j);
      *grad = Eigen::Map<const Vec>(gg.data(), gg.size());
    }
    return e.value()(0, 0);
  };
  const Mat j0 = rand_mat(2, 66, 1.0);
  CHECK(diff::grad_check(bonef, Eigen::Map<const Vec>(j0.data(), j0.size())).max_rel_error < 1e-6);
}

TEST_CASE("ground plane maps the floor to z = 0") {
  const Eigen::Vector3d n = Eigen::Vector3d(0.1, -1.0, 0.2).normalized();
  const GroundPlane gp = GroundPlane::from_normal_offset(n, 1.5);
  Eigen::Vector3d nn;
  double d = 0.0;
  gp.decompose(Eigen::Vector3d(0, -1, 0), nn, d);
  CHECK((nn - n).norm() < 1e-12);
  CHECK(d == doctest::Approx(1.5));
  CHECK(nn.y() < 0.0);
  const Mat p = ground_params(gp.g, Eigen::Vector3d(0, -1, 0));
  // a point on the plane n.p + d = 0
  const Eigen::Vector3d on = -d * n + Eigen::Vector3d(0.3, 0.0, 0.0).cross(n);
  Mat x(1, 3);
  x << on.x(), on.y(), on.z();
  const Mat w = rigid_apply(x, p, points_layout(1), false);
  CHECK(std::abs(w(0, 2)) < 1e-12);
  Mat ident(1, 12);
  ident << 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0;
  CHECK(ground_params(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, 1)) == ident);
}
