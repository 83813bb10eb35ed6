#include "motionprior/diff/ops.hpp"
#include "motionprior/diff/optim.hpp"
#include "motionprior/diff/params.hpp"
#include "motionprior/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace motionprior;
using namespace motionprior::diff;

namespace {

Vec random_vec(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

// Wraps a tape expression of one input row into a DiffFunction.
template <class Build>
DiffFunction tape_fn(Eigen::Index rows, Eigen::Index cols, Build build) {
  return [=](const Vec& x, Vec* grad) {
    Tape t;
    Mat m = Eigen::Map<const Mat>(x.data(), rows, cols);
    Var v = t.variable(m);
    Var out = build(v);
    const double f = out.value()(0, 0);
    if (grad) {
      t.backward(out);
      Mat g = t.grad(v);
      *grad = Eigen::Map<const Vec>(g.data(), g.size());
    }
    return f;
  };
}

}  // namespace

TEST_CASE("grad_check on a quadratic is exact") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  CHECK(grad_check(f, random_vec(7, 1)).max_rel_error < 1e-8);
}

TEST_CASE("grad_check on sum of sines") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    if (g) *g = x.array().cos().matrix();
    return x.array().sin().sum();
  };
  CHECK(grad_check(f, random_vec(9, 2)).max_rel_error < 1e-6);
}

TEST_CASE("grad_check of a constant reports zero gradients") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    if (g) *g = Vec::Zero(x.size());
    return 3.0;
  };
  const auto r = grad_check(f, random_vec(4, 3));
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.analytic == 0.0);
  CHECK(r.numeric == 0.0);
}

TEST_CASE("grad_check flags a wrong gradient") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    if (g) *g = 3.0 * x;
    return x.squaredNorm();
  };
  CHECK(grad_check(f, Vec::Ones(3)).max_rel_error > 0.1);
}

TEST_CASE("lbfgs solves a shifted quadratic quickly") {
  Vec c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  DiffFunction f = [&](const Vec& x, Vec* g) {
    if (g) *g = 2.0 * (x - c);
    return (x - c).squaredNorm();
  };
  LbfgsOptions o;
  o.max_iters = 5;
  const auto r = lbfgs_minimize(f, Vec::Zero(4), o);
  CHECK((r.x - c).norm() < 1e-8);
  CHECK(r.iterations <= 5);
}

TEST_CASE("lbfgs minimizes Rosenbrock") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    if (g) {
      g->resize(2);
      (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
      (*g)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  Vec x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions o;
  o.max_iters = 200;
  const auto r = lbfgs_minimize(f, x0, o);
  CHECK(r.f < 1e-6);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
}

TEST_CASE("lbfgs rejects max_iters = 0 and non-finite start") {
  DiffFunction f = [](const Vec& x, Vec* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  LbfgsOptions o;
  o.max_iters = 0;
  CHECK_THROWS_AS(lbfgs_minimize(f, Vec::Zero(2), o), Error);
  DiffFunction bad = [](const Vec& x, Vec* g) {
    if (g) *g = Vec::Zero(x.size());
    return std::nan("");
  };
  try {
    lbfgs_minimize(bad, Vec::Zero(2), LbfgsOptions{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("adamax matches a hand-stepped trace") {
  Vec p(2), g(2);
  p << 1.0, -1.0;
  g << 0.5, -2.0;
  AdamaxState st;
  AdamaxOptions o;
  o.lr = 0.1;
  // reference recurrence, by hand
  double m0 = 0, u0 = 0, m1 = 0, u1 = 0, p0 = 1.0, p1 = -1.0;
  for (int t = 1; t <= 3; ++t) {
    adamax_step(p, g, st, o);
    m0 = 0.9 * m0 + 0.1 * 0.5;
    m1 = 0.9 * m1 + 0.1 * -2.0;
    u0 = std::max(0.999 * u0, 0.5);
    u1 = std::max(0.999 * u1, 2.0);
    const double lr_t = 0.1 / (1.0 - std::pow(0.9, t));
    p0 -= lr_t * m0 / (u0 + 1e-8);
    p1 -= lr_t * m1 / (u1 + 1e-8);
    CHECK(p[0] == doctest::Approx(p0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(p1).epsilon(1e-14));
  }
  // first step has magnitude lr for a constant gradient
  Vec q = Vec::Zero(1), gq = Vec::Constant(1, 3.0);
  AdamaxState s2;
  adamax_step(q, gq, s2, o);
  CHECK(q[0] == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adamax leaves parameters alone for zero gradient or zero lr") {
  Vec p = random_vec(5, 4), p0 = p;
  AdamaxState st;
  AdamaxOptions o;
  for (int i = 0; i < 10; ++i) adamax_step(p, Vec::Zero(5), st, o);
  CHECK(p == p0);
  o.lr = 0.0;
  AdamaxState st2;
  adamax_step(p, random_vec(5, 5), st2, o);
  CHECK(p == p0);
  AdamaxState st3;
  CHECK_THROWS_AS(adamax_step(p, Vec::Zero(4), st3, o), Error);
}

TEST_CASE("param vector segments") {
  ParamVector pv;
  pv.add("a", 2, 3);
  pv.add("b", 1, 4);
  CHECK(pv.size() == 10);
  CHECK(pv.segment("b").offset == 6);
  Mat m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  pv.set("a", m);
  CHECK(pv.values()[5] == 6.0);
  CHECK_THROWS_AS(pv.add("a", 1, 1), Error);
  CHECK_THROWS_AS(pv.segment("zz"), Error);
}

TEST_CASE("tape ops gradients match finite differences") {
  const int r = 3, c = 4;
  Vec x = random_vec(r * c, 11);
  Mat w = Eigen::Map<const Mat>(random_vec(c * 5, 12).data(), c, 5);
  auto check = [&](auto build) {
    DiffFunction f = tape_fn(r, c, build);
    CHECK(grad_check(f, x).max_rel_error < 1e-6);
  };
  check([&](Var v) { return sum(square(matmul(v, v.tape()->constant(w)))); });
  check([&](Var v) { return mean(sigmoid(v)); });
  check([&](Var v) { return sum(mul(exp(scale(v, 0.3)), v)); });
  check([&](Var v) { return sum(log(add_scalar(square(v), 1.0))); });
  check([&](Var v) { return sum(relu(add_scalar(v, 0.05))); });
  check([&](Var v) { return sum(square(sum_rows(v))); });
  check([&](Var v) { return sum(square(sum_cols(v))); });
  check([&](Var v) { return sum(square(concat_cols({slice_cols(v, 1, 2), v}))); });
  check([&](Var v) { return sum(square(concat_rows({slice_rows(v, 1, 2), v}))); });
  check([&](Var v) { return sum(square(gather_cols(v, {3, 0, 0}))); });
  check([&](Var v) { return sum(square(add_row(v, slice_rows(v, 0, 1)))); });
  check([&](Var v) { return sum(square(mul_row(v, slice_rows(v, 2, 1)))); });
  check([&](Var v) { return sum(square(repeat_rows(slice_rows(v, 1, 1), 4))); });
  check([&](Var v) { return sum(clamp(scale(v, 2.0), -0.7, 0.7)); });
  check([&](Var v) {
    Tape& t = *v.tape();
    Mat tgt = Mat::Constant(r, c, 0.5);
    Mat tg2 = Mat::Zero(r, c);
    tg2(0, 1) = 1.0;
    tg2(2, 3) = 1.0;
    return add(bce_with_logits(v, tg2), weighted_sq_error(v, tgt, Mat::Constant(r, c, 0.3)));
    (void)t;
  });
  check([&](Var v) {
    Tape& t = *v.tape();
    Mat gamma = Mat::Constant(1, c, 1.3), beta = Mat::Constant(1, c, -0.2);
    Var gn = group_norm(v, t.constant(gamma), t.constant(beta), 2);
    return sum(mul(gn, t.constant(Eigen::Map<const Mat>(random_vec(r * c, 13).data(), r, c))));
  });
}

TEST_CASE("bce of probability one half is ln 2") {
  Tape t;
  Var l = t.constant(Mat::Zero(1, 1));
  Var b = bce_with_logits(l, Mat::Ones(1, 1));
  CHECK(b.value()(0, 0) == doctest::Approx(std::log(2.0)));
}
