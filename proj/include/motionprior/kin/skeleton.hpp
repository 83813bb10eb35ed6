#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace motionprior::kin {

inline constexpr int kJointCount = 22;
inline constexpr int kBoneCount = kJointCount - 1;
inline constexpr int kShapeDim = 16;
inline constexpr int kContactCount = 8;
inline constexpr int kDefaultMarkerCount = 43;

struct Marker {
  std::string name;
  int joint = 0;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

/// Kinematic tree with bone-length shape model. Joint 0 is the root and
/// bone k connects joint k+1 to its parent.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parents;                 // parents[0] == -1
  std::vector<Eigen::Vector3d> rest_offsets;  // in the parent frame, meters
  Eigen::MatrixXd shape_basis;              // kBoneCount x kShapeDim
  std::vector<int> contact_joints;          // toes (L,R), heels (L,R), knees (L,R), hands (L,R)
  std::vector<Marker> markers;

  int joint_count() const { return static_cast<int>(parents.size()); }
  int marker_count() const { return static_cast<int>(markers.size()); }

  /// Throws a topology error when the invariants do not hold.
  void validate() const;

  /// Bone scale factors exp(shape_basis * beta), one per bone.
  Eigen::VectorXd bone_scales(const Eigen::VectorXd& beta) const;
  /// Rest bone lengths scaled by shape.
  Eigen::VectorXd bone_lengths(const Eigen::VectorXd& beta) const;

  /// Knees, ankles and toes.
  std::vector<int> leg_joints() const;

  nlohmann::json to_json() const;
  static Skeleton from_json(const nlohmann::json& j);
  static Skeleton load(const std::string& path);
  void save(const std::string& path) const;

  /// Stable content hash (hex FNV-1a over the canonical JSON form).
  std::string hash() const;

  /// Built-in humanoid: z-up, facing +y at rest, body right along +x.
  static const Skeleton& default_humanoid();
};

}  // namespace motionprior::kin
