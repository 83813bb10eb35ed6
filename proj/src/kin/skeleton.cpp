#include "motionprior/kin/skeleton.hpp"

#include "motionprior/error.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>

namespace motionprior::kin {

void Skeleton::validate() const {
  const int n = joint_count();
  require(n >= 2, ErrorKind::Topology, "skeleton needs at least two joints");
  require(static_cast<int>(rest_offsets.size()) == n, ErrorKind::Topology,
          "rest_offsets length differs from joint count");
  require(parents[0] == -1, ErrorKind::Topology, "joint 0 must be the root");
  for (int j = 1; j < n; ++j) {
    require(parents[j] >= 0 && parents[j] < j, ErrorKind::Topology,
            "parent of joint " + std::to_string(j) + " is not an earlier joint");
    require(rest_offsets[j].allFinite() && rest_offsets[j].norm() > 0.0, ErrorKind::Topology,
            "rest bone " + std::to_string(j) + " has non-positive length");
  }
  require(shape_basis.rows() == n - 1 && shape_basis.cols() == kShapeDim, ErrorKind::Topology,
          "shape_basis must be (joints-1) x 16");
  require(shape_basis.allFinite(), ErrorKind::Topology, "shape_basis not finite");
  require(static_cast<int>(contact_joints.size()) == kContactCount, ErrorKind::Topology,
          "expected 8 contact joints");
  std::set<int> seen;
  for (int c : contact_joints) {
    require(c >= 0 && c < n, ErrorKind::Topology, "contact joint out of range");
    require(seen.insert(c).second, ErrorKind::Topology, "contact joints must be distinct");
  }
  for (const Marker& m : markers) {
    require(m.joint >= 0 && m.joint < n, ErrorKind::Topology, "marker '" + m.name + "' joint out of range");
    require(m.offset.allFinite(), ErrorKind::Topology, "marker '" + m.name + "' offset not finite");
  }
  if (!joint_names.empty())
    require(static_cast<int>(joint_names.size()) == n, ErrorKind::Topology, "joint_names length");
}

Eigen::VectorXd Skeleton::bone_scales(const Eigen::VectorXd& beta) const {
  require(beta.size() == kShapeDim, ErrorKind::DimensionMismatch, "shape vector must have 16 entries");
  return (shape_basis * beta).array().exp();
}

Eigen::VectorXd Skeleton::bone_lengths(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd s = bone_scales(beta);
  for (int k = 0; k < s.size(); ++k) s[k] *= rest_offsets[k + 1].norm();
  return s;
}

std::vector<int> Skeleton::leg_joints() const {
  // knees, ankles, toes are the first six contact joints in any order
  return {contact_joints[4], contact_joints[5], contact_joints[2], contact_joints[3],
          contact_joints[0], contact_joints[1]};
}

namespace {

nlohmann::json vec3_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Eigen::Vector3d json_vec3(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 3, ErrorKind::Format, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json Skeleton::to_json() const {
  nlohmann::json j;
  j["joint_names"] = joint_names;
  j["parents"] = parents;
  nlohmann::json off = nlohmann::json::array();
  for (const auto& o : rest_offsets) off.push_back(vec3_json(o));
  j["rest_offsets"] = off;
  nlohmann::json basis = nlohmann::json::array();
  for (Eigen::Index r = 0; r < shape_basis.rows(); ++r) {
    std::vector<double> row(shape_basis.cols());
    for (Eigen::Index c = 0; c < shape_basis.cols(); ++c) row[c] = shape_basis(r, c);
    basis.push_back(row);
  }
  j["shape_basis"] = basis;
  j["contact_joints"] = contact_joints;
  nlohmann::json mk = nlohmann::json::array();
  for (const Marker& m : markers)
    mk.push_back({{"name", m.name}, {"joint", m.joint}, {"offset", vec3_json(m.offset)}});
  j["markers"] = mk;
  return j;
}

Skeleton Skeleton::from_json(const nlohmann::json& j) {
  Skeleton s;
  try {
    if (j.contains("joint_names")) s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    s.parents = j.at("parents").get<std::vector<int>>();
    for (const auto& o : j.at("rest_offsets")) s.rest_offsets.push_back(json_vec3(o));
    const auto& basis = j.at("shape_basis");
    const auto rows = static_cast<Eigen::Index>(basis.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(basis[0].size()) : 0;
    s.shape_basis.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      require(static_cast<Eigen::Index>(basis[r].size()) == cols, ErrorKind::Format, "ragged shape_basis");
      for (Eigen::Index c = 0; c < cols; ++c) s.shape_basis(r, c) = basis[r][c].get<double>();
    }
    s.contact_joints = j.at("contact_joints").get<std::vector<int>>();
    for (const auto& m : j.at("markers"))
      s.markers.push_back(Marker{m.at("name").get<std::string>(), m.at("joint").get<int>(),
                                 json_vec3(m.at("offset"))});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("skeleton json: ") + e.what());
  }
  if (s.parents.empty()) throw Error(ErrorKind::Topology, "skeleton has no joints");
  s.validate();
  return s;
}

Skeleton Skeleton::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open skeleton file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "skeleton file " + path + ": " + e.what());
  }
  return from_json(j);
}

void Skeleton::save(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write skeleton file " + path);
  out << to_json().dump(2) << "\n";
}

std::string Skeleton::hash() const {
  const std::string s = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

Skeleton build_humanoid() {
  Skeleton s;
  s.joint_names = {"pelvis",   "l_hip",      "r_hip",      "spine1",  "l_knee",  "r_knee",
                   "spine2",   "l_ankle",    "r_ankle",    "spine3",  "l_foot",  "r_foot",
                   "neck",     "l_collar",   "r_collar",   "head",    "l_shoulder", "r_shoulder",
                   "l_elbow",  "r_elbow",    "l_wrist",    "r_wrist"};
  s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
  using V = Eigen::Vector3d;
  s.rest_offsets = {
      V(0, 0, 0),           V(-0.09, 0, -0.08),    V(0.09, 0, -0.08),   V(0, -0.01, 0.11),
      V(0.01, 0.01, -0.40), V(-0.01, 0.01, -0.40), V(0, 0.01, 0.13),    V(0, -0.03, -0.38),
      V(0, -0.03, -0.38),   V(0, 0, 0.06),         V(0, 0.12, -0.05),   V(0, 0.12, -0.05),
      V(0, -0.02, 0.21),    V(-0.07, -0.01, 0.14), V(0.07, -0.01, 0.14), V(0, 0.04, 0.09),
      V(-0.11, -0.01, 0.03), V(0.11, -0.01, 0.03), V(-0.26, 0, 0),      V(0.26, 0, 0),
      V(-0.25, 0, 0),       V(0.25, 0, 0)};

  // Grouped log-scale directions. Column meaning:
  // 0 overall, 1 legs, 2 thighs, 3 shins, 4 feet, 5 torso, 6 neck+head, 7 arms,
  // 8 upper arms, 9 forearms, 10 shoulder width, 11 hip width, 12 thigh/shin ratio,
  // 13 arm asymmetry, 14 lower spine, 15 upper spine.
  s.shape_basis = Eigen::MatrixXd::Zero(kBoneCount, kShapeDim);
  auto set = [&](int joint, int col, double v) { s.shape_basis(joint - 1, col) += v; };
  for (int j = 1; j < kJointCount; ++j) set(j, 0, 0.05);
  for (int j : {4, 5, 7, 8, 10, 11}) set(j, 1, 0.05);
  for (int j : {4, 5}) set(j, 2, 0.05);
  for (int j : {7, 8}) set(j, 3, 0.05);
  for (int j : {10, 11}) set(j, 4, 0.05);
  for (int j : {3, 6, 9}) set(j, 5, 0.05);
  for (int j : {12, 15}) set(j, 6, 0.05);
  for (int j : {18, 19, 20, 21}) set(j, 7, 0.05);
  for (int j : {18, 19}) set(j, 8, 0.05);
  for (int j : {20, 21}) set(j, 9, 0.05);
  for (int j : {13, 14, 16, 17}) set(j, 10, 0.05);
  for (int j : {1, 2}) set(j, 11, 0.05);
  for (int j : {4, 5}) set(j, 12, 0.03);
  for (int j : {7, 8}) set(j, 12, -0.03);
  for (int j : {18, 20}) set(j, 13, 0.02);
  for (int j : {19, 21}) set(j, 13, -0.02);
  set(3, 14, 0.05);
  set(6, 14, 0.03);
  set(9, 15, 0.05);
  set(12, 15, 0.03);

  s.contact_joints = {10, 11, 7, 8, 4, 5, 20, 21};

  auto mk = [&](const std::string& name, int joint, double x, double y, double z) {
    s.markers.push_back(Marker{name, joint, V(x, y, z)});
  };
  mk("pelvis_front", 0, 0.0, 0.10, 0.0);
  mk("pelvis_back_l", 0, -0.07, -0.09, 0.02);
  mk("pelvis_back_r", 0, 0.07, -0.09, 0.02);
  mk("spine1_front", 3, 0.0, 0.11, 0.0);
  mk("spine1_back", 3, 0.0, -0.09, 0.0);
  mk("spine2_front", 6, 0.0, 0.12, 0.0);
  mk("spine2_back", 6, 0.0, -0.10, 0.0);
  mk("chest_l", 9, -0.09, 0.10, 0.04);
  mk("chest_r", 9, 0.09, 0.10, 0.04);
  mk("neck_back", 12, 0.0, -0.06, 0.02);
  mk("neck_front", 12, 0.0, 0.05, 0.0);
  mk("head_top", 15, 0.0, 0.0, 0.13);
  mk("head_front", 15, 0.0, 0.10, 0.05);
  mk("head_l", 15, -0.08, 0.0, 0.05);
  mk("head_r", 15, 0.08, 0.0, 0.05);
  mk("collar_l", 13, -0.04, 0.03, 0.04);
  mk("collar_r", 14, 0.04, 0.03, 0.04);
  const char* side[2] = {"l", "r"};
  for (int k = 0; k < 2; ++k) {
    const double sx = k == 0 ? -1.0 : 1.0;
    const std::string t = side[k];
    mk("shoulder_top_" + t, 16 + k, 0.0, 0.0, 0.06);
    mk("shoulder_out_" + t, 16 + k, sx * 0.05, 0.0, 0.02);
    mk("elbow_out_" + t, 18 + k, 0.0, -0.04, 0.0);
    mk("elbow_in_" + t, 18 + k, 0.0, 0.04, 0.0);
    mk("hand_back_" + t, 20 + k, sx * 0.08, 0.0, 0.03);
    mk("hand_palm_" + t, 20 + k, sx * 0.08, 0.0, -0.02);
    mk("thigh_front_" + t, 1 + k, 0.0, 0.08, -0.20);
    mk("thigh_side_" + t, 1 + k, sx * 0.08, 0.0, -0.15);
    mk("knee_front_" + t, 4 + k, 0.0, 0.06, 0.0);
    mk("knee_side_" + t, 4 + k, sx * 0.05, 0.0, 0.0);
    mk("ankle_out_" + t, 7 + k, sx * 0.04, 0.0, 0.0);
    mk("heel_" + t, 7 + k, 0.0, -0.05, -0.05);
    mk("toe_tip_" + t, 10 + k, 0.0, 0.05, 0.0);
  }
  s.validate();
  return s;
}

}  // namespace

const Skeleton& Skeleton::default_humanoid() {
  static const Skeleton s = build_humanoid();
  return s;
}

}  // namespace motionprior::kin
