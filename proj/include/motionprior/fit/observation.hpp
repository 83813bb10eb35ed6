#pragma once

#include "motionprior/data/clip.hpp"
#include "motionprior/kin/skeleton.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <random>
#include <string>
#include <vector>

namespace motionprior::fit {

enum class ObsKind { Joints3D, Keypoints3D, Joints2D, PointCloud };

const char* to_string(ObsKind kind);
ObsKind obs_kind_from_string(const std::string& s);

/// Per-frame observations. points[t] is P x 3 (P x 2 pixels for Joints2D,
/// N_t x 3 for point clouds). weights[t] holds visibility flags (0/1) for the
/// 3D variants and confidences in [0, 1] for Joints2D; clouds leave it empty.
struct Observation {
  ObsKind kind = ObsKind::Joints3D;
  double frame_rate = 30.0;
  std::vector<Eigen::MatrixXd> points;
  std::vector<Eigen::VectorXd> weights;

  int frame_count() const { return static_cast<int>(points.size()); }
  int point_dim() const { return kind == ObsKind::Joints2D ? 2 : 3; }

  /// Effective weight of datum i in frame t. Confidences below `min_conf` count as missing.
  double weight(int t, int i, double min_conf = 0.3) const;
  bool frame_has_data(int t, double min_conf = 0.3) const;

  /// Shapes per variant, at least two frames, data in frame 0.
  void validate(const kin::Skeleton& skel) const;

  nlohmann::json to_json() const;
  static Observation from_json(const nlohmann::json& j);
};

void save_observation(const Observation& obs, const std::string& path);
Observation load_observation(const std::string& path);

/// Pinhole camera; extrinsic maps world points into the camera frame: p_c = R p + t.
struct Camera {
  double fx = 1000.0, fy = 1000.0, cx = 640.0, cy = 360.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const;
  Eigen::Vector2d project(const Eigen::Vector3d& world) const;

  nlohmann::json to_json() const;
  static Camera from_json(const nlohmann::json& j);
  /// Camera at `eye` looking at `target` with world +z up on screen.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, double f = 1000.0,
                        double cx = 640.0, double cy = 360.0);
};

// Synthetic observations of a clip, in the clip's world frame.

/// Joint positions with isotropic Gaussian noise (std in meters).
Observation observe_joints(const data::MotionClip& clip, double noise_std, std::mt19937_64& rng);
/// Virtual markers from forward kinematics; markers below `occlude_below` (m) are hidden.
Observation observe_keypoints(const data::MotionClip& clip, const kin::Skeleton& skel,
                              double occlude_below = -1e9);
/// Projected joints with pixel noise; confidence 1 in front of the camera.
Observation observe_joints2d(const data::MotionClip& clip, const Camera& cam, double noise_px,
                             std::mt19937_64& rng);
/// Joints and markers with Gaussian noise plus a fraction of uniform outliers.
Observation observe_point_cloud(const data::MotionClip& clip, const kin::Skeleton& skel, double noise_std,
                                double outlier_fraction, std::mt19937_64& rng);

/// Virtual marker positions of every frame (frames x 3M), from forward kinematics.
Eigen::MatrixXd clip_markers(const data::MotionClip& clip, const kin::Skeleton& skel);

}  // namespace motionprior::fit
