#include "motionprior/kin/rigid.hpp"

#include "motionprior/diff/dual.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/state.hpp"

#include <cmath>

namespace motionprior::kin {

namespace {

using M3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;
using V3 = Eigen::Vector3d;

constexpr double kDegenerate = 1e-8;

template <class T>
std::array<T, 12> canonical_row(const T& r00, const T& r10, const T& rx, const T& ry, bool* degenerate) {
  using std::sqrt;
  using diff::sqrt;
  const T n2 = r00 * r00 + r10 * r10;
  T c(1.0), s(0.0);
  const bool deg = diff::value_of(n2) < kDegenerate * kDegenerate;
  if (!deg) {
    const T n = sqrt(n2);
    c = r00 / n;
    s = -(r10 / n);
  }
  if (degenerate) *degenerate = deg;
  // Q = Rz, t = Rz (-rx, -ry, 0)
  std::array<T, 12> p;
  p[0] = c;
  p[1] = -s;
  p[2] = T(0.0);
  p[3] = s;
  p[4] = c;
  p[5] = T(0.0);
  p[6] = T(0.0);
  p[7] = T(0.0);
  p[8] = T(1.0);
  p[9] = -(c * rx) + s * ry;
  p[10] = -(s * rx) - c * ry;
  p[11] = T(0.0);
  return p;
}

}  // namespace

const RigidLayout& feature_rigid_layout() {
  namespace fl = feature_layout;
  static const RigidLayout layout = {
      {RigidKind::Point, fl::kR, 1},
      {RigidKind::Vector, fl::kRDot, 1},
      {RigidKind::Matrix, fl::kRootRot, 1},
      {RigidKind::Vector, fl::kOmega, 1},
      {RigidKind::Point, fl::kJoints, kJointCount},
      {RigidKind::Vector, fl::kJointsDot, kJointCount},
  };
  return layout;
}

RigidLayout points_layout(int n) { return {{RigidKind::Point, 0, n}}; }

Mat rigid_apply(const Mat& x, const Mat& params, const RigidLayout& layout, bool inverse) {
  require(params.cols() == 12 && (params.rows() == 1 || params.rows() == x.rows()),
          ErrorKind::DimensionMismatch, "rigid transform: parameter shape");
  Mat y = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index pi = params.rows() == 1 ? 0 : i;
    const Eigen::Map<const M3> q(params.row(pi).data());
    const V3 t(params(pi, 9), params(pi, 10), params(pi, 11));
    for (const RigidEntry& e : layout) {
      const int stride = e.kind == RigidKind::Matrix ? 9 : 3;
      require(e.offset + stride * e.count <= x.cols(), ErrorKind::DimensionMismatch,
              "rigid transform: layout exceeds columns");
      for (int k = 0; k < e.count; ++k) {
        const int o = e.offset + stride * k;
        if (e.kind == RigidKind::Matrix) {
          const Eigen::Map<const M3> m(x.row(i).data() + o);
          Eigen::Map<M3> out(y.row(i).data() + o);
          out = inverse ? M3(q.transpose() * m) : M3(q * m);
        } else {
          const V3 p(x(i, o), x(i, o + 1), x(i, o + 2));
          V3 out;
          if (e.kind == RigidKind::Point)
            out = inverse ? V3(q.transpose() * (p - t)) : V3(q * p + t);
          else
            out = inverse ? V3(q.transpose() * p) : V3(q * p);
          for (int a = 0; a < 3; ++a) y(i, o + a) = out[a];
        }
      }
    }
  }
  return y;
}

void rigid_backward(const Mat& x, const Mat& params, const RigidLayout& layout, bool inverse,
                    const Mat& gy, Mat* gx, Mat* gparams) {
  if (gx) *gx = gy;
  if (gparams) gparams->setZero(x.rows(), 12);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index pi = params.rows() == 1 ? 0 : i;
    const Eigen::Map<const M3> q(params.row(pi).data());
    const V3 t(params(pi, 9), params(pi, 10), params(pi, 11));
    M3 gq = M3::Zero();
    V3 gt = V3::Zero();
    for (const RigidEntry& e : layout) {
      const int stride = e.kind == RigidKind::Matrix ? 9 : 3;
      for (int k = 0; k < e.count; ++k) {
        const int o = e.offset + stride * k;
        if (e.kind == RigidKind::Matrix) {
          const Eigen::Map<const M3> m(x.row(i).data() + o);
          const Eigen::Map<const M3> g(gy.row(i).data() + o);
          if (gx) {
            Eigen::Map<M3> gm(gx->row(i).data() + o);
            gm = inverse ? M3(q * g) : M3(q.transpose() * g);
          }
          gq += inverse ? M3(m * g.transpose()) : M3(g * m.transpose());
        } else {
          const V3 p(x(i, o), x(i, o + 1), x(i, o + 2));
          const V3 g(gy(i, o), gy(i, o + 1), gy(i, o + 2));
          const V3 gp = inverse ? V3(q * g) : V3(q.transpose() * g);
          if (gx)
            for (int a = 0; a < 3; ++a) (*gx)(i, o + a) = gp[a];
          if (e.kind == RigidKind::Point) {
            if (inverse) {
              gq += (p - t) * g.transpose();
              gt -= gp;
            } else {
              gq += g * p.transpose();
              gt += g;
            }
          } else {
            gq += inverse ? M3(p * g.transpose()) : M3(g * p.transpose());
          }
        }
      }
    }
    if (gparams) {
      for (int a = 0; a < 9; ++a) (*gparams)(i, a) = gq.data()[a];
      for (int a = 0; a < 3; ++a) (*gparams)(i, 9 + a) = gt[a];
    }
  }
}

Mat canonical_params(const Mat& features, std::vector<char>* degenerate) {
  namespace fl = feature_layout;
  require(features.cols() == fl::kSize, ErrorKind::DimensionMismatch, "canonical_params: feature width");
  Mat p(features.rows(), 12);
  if (degenerate) degenerate->assign(static_cast<std::size_t>(features.rows()), 0);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    bool deg = false;
    const auto row = canonical_row<double>(features(i, fl::kRootRot), features(i, fl::kRootRot + 3),
                                           features(i, fl::kR), features(i, fl::kR + 1), &deg);
    for (int a = 0; a < 12; ++a) p(i, a) = row[a];
    if (degenerate) (*degenerate)[static_cast<std::size_t>(i)] = deg ? 1 : 0;
  }
  return p;
}

Eigen::Matrix<double, 12, 4> canonical_params_jacobian(const double* f) {
  namespace fl = feature_layout;
  using D = diff::Dual<4>;
  const auto row = canonical_row<D>(D::seed(f[fl::kRootRot], 0), D::seed(f[fl::kRootRot + 3], 1),
                                    D::seed(f[fl::kR], 2), D::seed(f[fl::kR + 1], 3), nullptr);
  Eigen::Matrix<double, 12, 4> jac;
  for (int a = 0; a < 12; ++a)
    for (int d = 0; d < 4; ++d) jac(a, d) = row[a].d[d];
  return jac;
}

Mat yaw_shift_params(double yaw, double shift_x, double shift_y) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat p(1, 12);
  p << c, -s, 0, s, c, 0, 0, 0, 1, c * shift_x - s * shift_y, s * shift_x + c * shift_y, 0;
  return p;
}

}  // namespace motionprior::kin
