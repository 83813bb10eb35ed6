#include "motionprior/kin/geom_ops.hpp"

#include "motionprior/diff/ops.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kernels/fk.hpp"
#include "motionprior/kin/ground.hpp"
#include "motionprior/kin/rotation.hpp"
#include "motionprior/kin/state.hpp"

namespace motionprior::kin {

using diff::Mat;
using diff::Tape;

Var rodrigues_op(Var aa) {
  require(aa.cols() % 3 == 0, ErrorKind::DimensionMismatch, "rodrigues_op: width not a multiple of 3");
  const Eigen::Index b = aa.rows(), k = aa.cols() / 3;
  Mat out(b, 9 * k);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index q = 0; q < k; ++q) {
      const auto r = rodrigues<double>(aa.value()(i, 3 * q), aa.value()(i, 3 * q + 1), aa.value()(i, 3 * q + 2));
      for (int a = 0; a < 9; ++a) out(i, 9 * q + a) = r[a];
    }
  return aa.tape()->record(std::move(out), {aa}, [aa, b, k](Tape& t, const Mat& g) {
    using D = diff::Dual<3>;
    Mat ga(b, 3 * k);
    const Mat& v = aa.value();
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index q = 0; q < k; ++q) {
        const auto r = rodrigues<D>(D::seed(v(i, 3 * q), 0), D::seed(v(i, 3 * q + 1), 1),
                                    D::seed(v(i, 3 * q + 2), 2));
        for (int d = 0; d < 3; ++d) {
          double s = 0.0;
          for (int a = 0; a < 9; ++a) s += g(i, 9 * q + a) * r[a].d[d];
          ga(i, 3 * q + d) = s;
        }
      }
    t.accumulate(aa, ga);
  });
}

Var rotation_log_op(Var rot) {
  require(rot.cols() % 9 == 0, ErrorKind::DimensionMismatch, "rotation_log_op: width not a multiple of 9");
  const Eigen::Index b = rot.rows(), k = rot.cols() / 9;
  Mat out(b, 3 * k);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index q = 0; q < k; ++q) {
      Rot9<double> r;
      for (int a = 0; a < 9; ++a) r[a] = rot.value()(i, 9 * q + a);
      const auto v = rotation_log_smooth<double>(r);
      for (int a = 0; a < 3; ++a) out(i, 3 * q + a) = v[a];
    }
  return rot.tape()->record(std::move(out), {rot}, [rot, b, k](Tape& t, const Mat& g) {
    using D = diff::Dual<9>;
    Mat gr(b, 9 * k);
    const Mat& v = rot.value();
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index q = 0; q < k; ++q) {
        Rot9<D> r;
        for (int a = 0; a < 9; ++a) r[a] = D::seed(v(i, 9 * q + a), a);
        const auto l = rotation_log_smooth<D>(r);
        for (int a = 0; a < 9; ++a)
          gr(i, 9 * q + a) = g(i, 3 * q) * l[0].d[a] + g(i, 3 * q + 1) * l[1].d[a] + g(i, 3 * q + 2) * l[2].d[a];
      }
    t.accumulate(rot, gr);
  });
}

namespace {
using M3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;
}

Var rotmat_mul_op(Var a, Var bm) {
  require(a.rows() == bm.rows() && a.cols() == bm.cols() && a.cols() % 9 == 0, ErrorKind::DimensionMismatch,
          "rotmat_mul_op: shapes");
  const Eigen::Index rows = a.rows(), k = a.cols() / 9;
  Mat out(rows, 9 * k);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index q = 0; q < k; ++q)
      Eigen::Map<M3>(out.row(i).data() + 9 * q) =
          Eigen::Map<const M3>(a.value().row(i).data() + 9 * q) * Eigen::Map<const M3>(bm.value().row(i).data() + 9 * q);
  return a.tape()->record(std::move(out), {a, bm}, [a, bm, rows, k](Tape& t, const Mat& g) {
    Mat ga(rows, 9 * k), gb(rows, 9 * k);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index q = 0; q < k; ++q) {
        const Eigen::Map<const M3> am(a.value().row(i).data() + 9 * q);
        const Eigen::Map<const M3> bmm(bm.value().row(i).data() + 9 * q);
        const Eigen::Map<const M3> gm(g.row(i).data() + 9 * q);
        Eigen::Map<M3>(ga.row(i).data() + 9 * q) = gm * bmm.transpose();
        Eigen::Map<M3>(gb.row(i).data() + 9 * q) = am.transpose() * gm;
      }
    t.accumulate(a, ga);
    t.accumulate(bm, gb);
  });
}

FkVars fk_op(const Skeleton& skel, Var r, Var root_rot, Var pose_rot, Var beta, kernels::Exec exec) {
  Mat joints, markers, globals;
  kernels::fk_forward(skel, r.value(), root_rot.value(), pose_rot.value(), beta.value(), joints, markers,
                      globals, exec);
  const Eigen::Index nj = joints.cols(), nm = markers.cols();
  Mat combined(joints.rows(), nj + nm);
  combined << joints, markers;
  const Skeleton* sk = &skel;
  Var out = r.tape()->record(
      std::move(combined), {r, root_rot, pose_rot, beta},
      [sk, r, root_rot, pose_rot, beta, globals = std::move(globals), nj, nm, exec](Tape& t, const Mat& g) {
        Mat gj = g.leftCols(nj), gm = g.rightCols(nm);
        Mat gr, groot, gpose, gbeta;
        kernels::fk_backward(*sk, root_rot.value(), pose_rot.value(), beta.value(), globals, gj, gm, gr, groot,
                             gpose, gbeta, exec);
        t.accumulate(r, gr);
        t.accumulate(root_rot, groot);
        t.accumulate(pose_rot, gpose);
        if (beta.requires_grad()) {
          if (beta.rows() == 1 && gbeta.rows() != 1)
            t.accumulate_expr(beta, gbeta.colwise().sum());
          else
            t.accumulate(beta, gbeta);
        }
      });
  FkVars v;
  v.joints = diff::slice_cols(out, 0, nj);
  v.markers = diff::slice_cols(out, nj, nm);
  return v;
}

Var canonical_params_op(Var features) {
  Mat p = canonical_params(features.value());
  return features.tape()->record(std::move(p), {features}, [features](Tape& t, const Mat& g) {
    namespace fl = feature_layout;
    const Mat& f = features.value();
    Mat& gf = t.grad_buffer(features);
    const int cols[4] = {fl::kRootRot, fl::kRootRot + 3, fl::kR, fl::kR + 1};
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      const Eigen::Matrix<double, 12, 4> jac = canonical_params_jacobian(f.row(i).data());
      const Eigen::Matrix<double, 1, 4> gi = g.row(i) * jac;
      for (int d = 0; d < 4; ++d) gf(i, cols[d]) += gi[d];
    }
  });
}

Var rigid_transform_op(Var x, Var params, const RigidLayout& layout, bool inverse) {
  Mat y = rigid_apply(x.value(), params.value(), layout, inverse);
  return x.tape()->record(std::move(y), {x, params}, [x, params, layout, inverse](Tape& t, const Mat& g) {
    Mat gx, gp;
    rigid_backward(x.value(), params.value(), layout, inverse, g, x.requires_grad() ? &gx : nullptr,
                   params.requires_grad() ? &gp : nullptr);
    if (x.requires_grad()) t.accumulate(x, gx);
    if (params.requires_grad()) {
      if (params.rows() == 1 && gp.rows() != 1)
        t.accumulate_expr(params, gp.colwise().sum());
      else
        t.accumulate(params, gp);
    }
  });
}

Var ground_params_op(Var g, const Eigen::Vector3d& up_hint) {
  require(g.rows() == 1 && g.cols() == 3, ErrorKind::DimensionMismatch, "ground_params_op: g must be 1 x 3");
  const Eigen::Vector3d gv(g.value()(0, 0), g.value()(0, 1), g.value()(0, 2));
  Eigen::Matrix<double, 12, 3> jac;
  Mat p = ground_params(gv, up_hint, &jac);
  return g.tape()->record(std::move(p), {g}, [g, jac](Tape& t, const Mat& gr) {
    Mat gg = gr * jac;
    t.accumulate(g, gg);
  });
}

Var bone_lengths_op(const Skeleton& skel, Var joints) {
  const int n = skel.joint_count();
  require(joints.cols() == 3 * n, ErrorKind::DimensionMismatch, "bone_lengths_op: joint width");
  const Eigen::Index b = joints.rows();
  Mat len(b, n - 1);
  const Mat& p = joints.value();
  for (Eigen::Index i = 0; i < b; ++i)
    for (int j = 1; j < n; ++j) {
      const int q = skel.parents[j];
      const Eigen::Vector3d d(p(i, 3 * j) - p(i, 3 * q), p(i, 3 * j + 1) - p(i, 3 * q + 1),
                              p(i, 3 * j + 2) - p(i, 3 * q + 2));
      len(i, j - 1) = d.norm();
    }
  std::vector<int> parents = skel.parents;
  Mat lv = len;
  return joints.tape()->record(std::move(len), {joints}, [joints, parents, lv, n](Tape& t, const Mat& g) {
    const Mat& p = joints.value();
    Mat gp = Mat::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (int j = 1; j < n; ++j) {
        const int q = parents[j];
        const double l = lv(i, j - 1);
        if (l <= 0.0) continue;
        for (int a = 0; a < 3; ++a) {
          const double u = (p(i, 3 * j + a) - p(i, 3 * q + a)) / l * g(i, j - 1);
          gp(i, 3 * j + a) += u;
          gp(i, 3 * q + a) -= u;
        }
      }
    t.accumulate(joints, gp);
  });
}

}  // namespace motionprior::kin
