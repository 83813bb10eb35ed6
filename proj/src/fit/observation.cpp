#include "motionprior/fit/observation.hpp"

#include "motionprior/error.hpp"
#include "motionprior/kin/fk.hpp"

#include <fstream>

namespace motionprior::fit {

const char* to_string(ObsKind kind) {
  switch (kind) {
    case ObsKind::Joints3D: return "joints3d";
    case ObsKind::Keypoints3D: return "keypoints3d";
    case ObsKind::Joints2D: return "joints2d";
    case ObsKind::PointCloud: return "pointcloud";
  }
  return "?";
}

ObsKind obs_kind_from_string(const std::string& s) {
  for (ObsKind k : {ObsKind::Joints3D, ObsKind::Keypoints3D, ObsKind::Joints2D, ObsKind::PointCloud})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::Config, "unknown observation kind '" + s + "'");
}

double Observation::weight(int t, int i, double min_conf) const {
  if (kind == ObsKind::PointCloud) return 1.0;
  const double w = weights[t][i];
  if (kind == ObsKind::Joints2D) return w < min_conf ? 0.0 : w;
  return w > 0.0 ? 1.0 : 0.0;
}

bool Observation::frame_has_data(int t, double min_conf) const {
  const Eigen::Index n = points[t].rows();
  if (kind == ObsKind::PointCloud) return n > 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (weight(t, static_cast<int>(i), min_conf) > 0.0) return true;
  return false;
}

void Observation::validate(const kin::Skeleton& skel) const {
  require(frame_rate > 0.0, ErrorKind::Config, "observation frame rate must be positive");
  require(frame_count() >= 2, ErrorKind::Precondition, "observation needs at least two frames");
  const bool cloud = kind == ObsKind::PointCloud;
  require(cloud || weights.size() == points.size(), ErrorKind::LengthMismatch,
          "observation weights must have one entry per frame");
  Eigen::Index expect = -1;
  if (kind == ObsKind::Joints3D || kind == ObsKind::Joints2D) expect = skel.joint_count();
  if (kind == ObsKind::Keypoints3D) expect = skel.marker_count();
  for (int t = 0; t < frame_count(); ++t) {
    const auto& p = points[t];
    require(p.cols() == point_dim(), ErrorKind::DimensionMismatch,
            "observation frame " + std::to_string(t) + " has the wrong point dimension");
    if (expect >= 0)
      require(p.rows() == expect, ErrorKind::DimensionMismatch,
              "observation frame " + std::to_string(t) + " has the wrong point count");
    if (!cloud) {
      require(weights[t].size() == p.rows(), ErrorKind::LengthMismatch,
              "observation frame " + std::to_string(t) + " weight count");
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        if (weight(t, static_cast<int>(i)) > 0.0)
          require(p.row(i).allFinite(), ErrorKind::Numeric, "non-finite visible observation");
    } else {
      require(p.allFinite(), ErrorKind::Numeric, "non-finite point cloud");
    }
  }
  require(frame_has_data(0), ErrorKind::Precondition, "observation frame 0 has no visible data");
}

nlohmann::json Observation::to_json() const {
  nlohmann::json frames = nlohmann::json::array();
  for (int t = 0; t < frame_count(); ++t) {
    nlohmann::json f;
    nlohmann::json pts = nlohmann::json::array();
    for (Eigen::Index i = 0; i < points[t].rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index d = 0; d < points[t].cols(); ++d) row.push_back(points[t](i, d));
      pts.push_back(row);
    }
    f["points"] = pts;
    if (kind != ObsKind::PointCloud)
      f["weights"] = std::vector<double>(weights[t].data(), weights[t].data() + weights[t].size());
    frames.push_back(f);
  }
  return {{"kind", to_string(kind)}, {"frame_rate", frame_rate}, {"frames", frames}};
}

Observation Observation::from_json(const nlohmann::json& j) {
  Observation o;
  o.kind = obs_kind_from_string(j.at("kind").get<std::string>());
  o.frame_rate = j.value("frame_rate", 30.0);
  const int dim = o.point_dim();
  for (const auto& f : j.at("frames")) {
    const auto& pts = f.at("points");
    Eigen::MatrixXd p(static_cast<Eigen::Index>(pts.size()), dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      require(pts[i].size() == static_cast<std::size_t>(dim), ErrorKind::DimensionMismatch,
              "observation point has the wrong dimension");
      for (int d = 0; d < dim; ++d) {
        // hidden entries may be stored as null
        p(static_cast<Eigen::Index>(i), d) = pts[i][d].is_null() ? 0.0 : pts[i][d].get<double>();
      }
    }
    o.points.push_back(std::move(p));
    if (o.kind != ObsKind::PointCloud) {
      const auto w = f.at("weights").get<std::vector<double>>();
      o.weights.push_back(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
    }
  }
  return o;
}

void save_observation(const Observation& obs, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << obs.to_json().dump();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

Observation load_observation(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": " + e.what());
  }
  return Observation::from_json(j);
}

void Camera::validate() const {
  require(fx > 0.0 && fy > 0.0, ErrorKind::Config, "camera focal lengths must be positive");
  require(std::abs(rotation.determinant() - 1.0) < 1e-6 &&
              (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-6,
          ErrorKind::Config, "camera rotation must be orthonormal");
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d c = rotation * world + translation;
  return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy};
}

nlohmann::json Camera::to_json() const {
  // stored row-major
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> rm = rotation;
  const std::vector<double> r(rm.data(), rm.data() + 9);
  return {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy}, {"rotation", r},
          {"translation", {translation.x(), translation.y(), translation.z()}}};
}

Camera Camera::from_json(const nlohmann::json& j) {
  Camera c;
  c.fx = j.value("fx", c.fx);
  c.fy = j.value("fy", c.fy);
  c.cx = j.value("cx", c.cx);
  c.cy = j.value("cy", c.cy);
  if (j.contains("rotation")) {
    const auto r = j.at("rotation").get<std::vector<double>>();
    require(r.size() == 9, ErrorKind::Config, "camera rotation needs 9 values");
    c.rotation = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.data());
  }
  if (j.contains("translation")) {
    const auto t = j.at("translation").get<std::vector<double>>();
    require(t.size() == 3, ErrorKind::Config, "camera translation needs 3 values");
    c.translation = Eigen::Vector3d(t[0], t[1], t[2]);
  }
  c.validate();
  return c;
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double f, double cx,
                       double cy) {
  const Eigen::Vector3d fwd = (target - eye).normalized();
  Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ());
  require(right.norm() > 1e-9, ErrorKind::Config, "look_at: view direction is vertical");
  right.normalize();
  const Eigen::Vector3d down = fwd.cross(right);
  Camera c;
  c.fx = c.fy = f;
  c.cx = cx;
  c.cy = cy;
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = fwd.transpose();
  c.translation = -c.rotation * eye;
  return c;
}

Eigen::MatrixXd clip_markers(const data::MotionClip& clip, const kin::Skeleton& skel) {
  const int m = skel.marker_count();
  Eigen::MatrixXd out(clip.frame_count(), 3 * m);
  for (int t = 0; t < clip.frame_count(); ++t) {
    const auto& s = clip.states[t];
    const kin::FkOutput fk = kin::forward_kinematics(skel, clip.shape, s.r, s.phi, s.theta);
    for (int i = 0; i < m; ++i) out.block(t, 3 * i, 1, 3) = fk.markers.row(i);
  }
  return out;
}

Observation observe_joints(const data::MotionClip& clip, double noise_std, std::mt19937_64& rng) {
  Observation o;
  o.kind = ObsKind::Joints3D;
  o.frame_rate = clip.frame_rate;
  std::normal_distribution<double> n01;
  for (const auto& s : clip.states) {
    Eigen::MatrixXd p = s.joints;
    if (noise_std > 0.0)
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += noise_std * n01(rng);
    o.points.push_back(std::move(p));
    o.weights.push_back(Eigen::VectorXd::Ones(kin::kJointCount));
  }
  return o;
}

Observation observe_keypoints(const data::MotionClip& clip, const kin::Skeleton& skel, double occlude_below) {
  Observation o;
  o.kind = ObsKind::Keypoints3D;
  o.frame_rate = clip.frame_rate;
  const Eigen::MatrixXd mk = clip_markers(clip, skel);
  const int m = skel.marker_count();
  for (int t = 0; t < clip.frame_count(); ++t) {
    Eigen::MatrixXd p(m, 3);
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) {
      p.row(i) = mk.block(t, 3 * i, 1, 3);
      w[i] = p(i, 2) < occlude_below ? 0.0 : 1.0;
    }
    o.points.push_back(std::move(p));
    o.weights.push_back(std::move(w));
  }
  return o;
}

Observation observe_joints2d(const data::MotionClip& clip, const Camera& cam, double noise_px,
                             std::mt19937_64& rng) {
  cam.validate();
  Observation o;
  o.kind = ObsKind::Joints2D;
  o.frame_rate = clip.frame_rate;
  std::normal_distribution<double> n01;
  for (const auto& s : clip.states) {
    Eigen::MatrixXd p(kin::kJointCount, 2);
    Eigen::VectorXd w(kin::kJointCount);
    for (int j = 0; j < kin::kJointCount; ++j) {
      const Eigen::Vector3d world = s.joints.row(j).transpose();
      const double depth = (cam.rotation * world + cam.translation).z();
      const Eigen::Vector2d uv = cam.project(world);
      p(j, 0) = uv.x() + noise_px * n01(rng);
      p(j, 1) = uv.y() + noise_px * n01(rng);
      w[j] = depth > 0.1 ? 1.0 : 0.0;
    }
    o.points.push_back(std::move(p));
    o.weights.push_back(std::move(w));
  }
  return o;
}

Observation observe_point_cloud(const data::MotionClip& clip, const kin::Skeleton& skel, double noise_std,
                                double outlier_fraction, std::mt19937_64& rng) {
  Observation o;
  o.kind = ObsKind::PointCloud;
  o.frame_rate = clip.frame_rate;
  const Eigen::MatrixXd mk = clip_markers(clip, skel);
  const int m = skel.marker_count();
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  for (int t = 0; t < clip.frame_count(); ++t) {
    const auto& s = clip.states[t];
    const int body = kin::kJointCount + m;
    const int outliers = static_cast<int>(std::round(outlier_fraction * body));
    Eigen::MatrixXd p(body + outliers, 3);
    for (int j = 0; j < kin::kJointCount; ++j) p.row(j) = s.joints.row(j);
    for (int i = 0; i < m; ++i) p.row(kin::kJointCount + i) = mk.block(t, 3 * i, 1, 3);
    for (int i = 0; i < body; ++i)
      for (int d = 0; d < 3; ++d) p(i, d) += noise_std * n01(rng);
    for (int i = 0; i < outliers; ++i) {
      // anywhere in a 2 m box around the root
      for (int d = 0; d < 3; ++d) p(body + i, d) = s.r[d] + 2.0 * (u01(rng) - 0.5);
    }
    o.points.push_back(std::move(p));
  }
  return o;
}

}  // namespace motionprior::fit
