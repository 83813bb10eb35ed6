#include "motionprior/kernels/fk.hpp"

#include "motionprior/error.hpp"

namespace motionprior::kernels {

namespace {

using M3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;
using V3 = Eigen::Vector3d;

void check_inputs(const kin::Skeleton& skel, const Mat& r, const Mat& root_rot, const Mat& pose_rot,
                  const Mat& beta) {
  const Eigen::Index b = r.rows();
  const int nb = skel.joint_count() - 1;
  require(r.cols() == 3 && root_rot.rows() == b && root_rot.cols() == 9 && pose_rot.rows() == b &&
              pose_rot.cols() == 9 * nb,
          ErrorKind::DimensionMismatch, "fk: input shapes");
  require(beta.cols() == kin::kShapeDim && (beta.rows() == 1 || beta.rows() == b),
          ErrorKind::DimensionMismatch, "fk: shape parameter rows");
}

// Scaled bone vectors for one shape row: s_j = rest_j * exp(basis_j . beta).
void bone_vectors(const kin::Skeleton& skel, const double* beta, std::vector<V3>& s,
                  std::vector<double>& scale) {
  const int n = skel.joint_count();
  s.resize(n);
  scale.resize(n);
  s[0].setZero();
  scale[0] = 1.0;
  Eigen::Map<const Eigen::VectorXd> b(beta, kin::kShapeDim);
  for (int j = 1; j < n; ++j) {
    scale[j] = std::exp(skel.shape_basis.row(j - 1).dot(b));
    s[j] = scale[j] * skel.rest_offsets[j];
  }
}

void forward_row(const kin::Skeleton& skel, Eigen::Index i, const Mat& r, const Mat& root_rot,
                 const Mat& pose_rot, const Mat& beta, Mat& joints, Mat& markers, Mat& globals) {
  const int n = skel.joint_count();
  std::vector<V3> s;
  std::vector<double> scale;
  bone_vectors(skel, beta.row(beta.rows() == 1 ? 0 : i).data(), s, scale);
  std::vector<M3> g(n);
  std::vector<V3> p(n);
  g[0] = Eigen::Map<const M3>(root_rot.row(i).data());
  p[0] = V3(r(i, 0), r(i, 1), r(i, 2));
  for (int j = 1; j < n; ++j) {
    const int par = skel.parents[j];
    const Eigen::Map<const M3> rj(pose_rot.row(i).data() + 9 * (j - 1));
    g[j] = g[par] * rj;
    p[j] = p[par] + g[par] * s[j];
  }
  for (int j = 0; j < n; ++j) {
    for (int a = 0; a < 3; ++a) joints(i, 3 * j + a) = p[j][a];
    Eigen::Map<M3>(globals.row(i).data() + 9 * j) = g[j];
  }
  for (int m = 0; m < skel.marker_count(); ++m) {
    const kin::Marker& mk = skel.markers[m];
    const V3 q = p[mk.joint] + g[mk.joint] * mk.offset;
    for (int a = 0; a < 3; ++a) markers(i, 3 * m + a) = q[a];
  }
}

void backward_row(const kin::Skeleton& skel, Eigen::Index i, const Mat& root_rot, const Mat& pose_rot,
                  const Mat& beta, const Mat& globals, const Mat& gj, const Mat& gm, Mat& g_r,
                  Mat& g_root, Mat& g_pose, Mat& g_beta) {
  const int n = skel.joint_count();
  std::vector<V3> s;
  std::vector<double> scale;
  bone_vectors(skel, beta.row(beta.rows() == 1 ? 0 : i).data(), s, scale);
  std::vector<V3> gp(n, V3::Zero());
  std::vector<M3> gg(n, M3::Zero());
  if (gj.size() > 0)
    for (int j = 0; j < n; ++j) gp[j] = V3(gj(i, 3 * j), gj(i, 3 * j + 1), gj(i, 3 * j + 2));
  if (gm.size() > 0) {
    for (int m = 0; m < skel.marker_count(); ++m) {
      const kin::Marker& mk = skel.markers[m];
      const V3 gq(gm(i, 3 * m), gm(i, 3 * m + 1), gm(i, 3 * m + 2));
      gp[mk.joint] += gq;
      gg[mk.joint] += gq * mk.offset.transpose();
    }
  }
  Eigen::VectorXd glog = Eigen::VectorXd::Zero(n - 1);  // d/d log(scale_j)
  for (int j = n - 1; j >= 1; --j) {
    const int par = skel.parents[j];
    const Eigen::Map<const M3> gpar(globals.row(i).data() + 9 * par);
    const Eigen::Map<const M3> rj(pose_rot.row(i).data() + 9 * (j - 1));
    gp[par] += gp[j];
    gg[par] += gp[j] * s[j].transpose() + gg[j] * rj.transpose();
    Eigen::Map<M3>(g_pose.row(i).data() + 9 * (j - 1)) = gpar.transpose() * gg[j];
    const V3 gs = gpar.transpose() * gp[j];
    glog[j - 1] = gs.dot(s[j]);
  }
  Eigen::Map<M3>(g_root.row(i).data()) = gg[0];
  for (int a = 0; a < 3; ++a) g_r(i, a) = gp[0][a];
  g_beta.row(i) = (skel.shape_basis.transpose() * glog).transpose();
}

}  // namespace

void fk_forward(const kin::Skeleton& skel, const Mat& r, const Mat& root_rot, const Mat& pose_rot,
                const Mat& beta, Mat& joints, Mat& markers, Mat& globals, Exec exec) {
  check_inputs(skel, r, root_rot, pose_rot, beta);
  const Eigen::Index b = r.rows();
  const int n = skel.joint_count();
  joints.resize(b, 3 * n);
  markers.resize(b, 3 * skel.marker_count());
  globals.resize(b, 9 * n);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < b; ++i)
      forward_row(skel, i, r, root_rot, pose_rot, beta, joints, markers, globals);
  } else {
    for (Eigen::Index i = 0; i < b; ++i)
      forward_row(skel, i, r, root_rot, pose_rot, beta, joints, markers, globals);
  }
}

void fk_backward(const kin::Skeleton& skel, const Mat& root_rot, const Mat& pose_rot,
                 const Mat& beta, const Mat& globals, const Mat& g_joints, const Mat& g_markers,
                 Mat& g_r, Mat& g_root_rot, Mat& g_pose_rot, Mat& g_beta, Exec exec) {
  const Eigen::Index b = root_rot.rows();
  const int n = skel.joint_count();
  require(g_joints.size() == 0 || (g_joints.rows() == b && g_joints.cols() == 3 * n),
          ErrorKind::DimensionMismatch, "fk_backward: joint gradient shape");
  require(g_markers.size() == 0 || (g_markers.rows() == b && g_markers.cols() == 3 * skel.marker_count()),
          ErrorKind::DimensionMismatch, "fk_backward: marker gradient shape");
  g_r.setZero(b, 3);
  g_root_rot.setZero(b, 9);
  g_pose_rot.setZero(b, 9 * (n - 1));
  g_beta.setZero(b, kin::kShapeDim);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < b; ++i)
      backward_row(skel, i, root_rot, pose_rot, beta, globals, g_joints, g_markers, g_r, g_root_rot,
                   g_pose_rot, g_beta);
  } else {
    for (Eigen::Index i = 0; i < b; ++i)
      backward_row(skel, i, root_rot, pose_rot, beta, globals, g_joints, g_markers, g_r, g_root_rot,
                   g_pose_rot, g_beta);
  }
}

}  // namespace motionprior::kernels
