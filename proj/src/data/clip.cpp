#include "motionprior/data/clip.hpp"

#include "motionprior/data/container.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/motion.hpp"

namespace motionprior::data {

namespace sl = kin::state_layout;

void MotionClip::validate(double vel_tol) const {
  require(frame_rate > 0.0, ErrorKind::Precondition, "clip '" + name + "': frame rate must be positive");
  require(!states.empty(), ErrorKind::Precondition, "clip '" + name + "' has no frames");
  require(contacts.rows() == frame_count() && contacts.cols() == kin::kContactCount, ErrorKind::LengthMismatch,
          "clip '" + name + "': contacts must be frames x 8");
  require(shape.size() == kin::kShapeDim && shape.allFinite(), ErrorKind::Precondition,
          "clip '" + name + "': bad shape vector");
  for (const auto& s : states) require(s.finite(), ErrorKind::Numeric, "clip '" + name + "' has non-finite frames");
  if (frame_count() < 2) return;
  const double h = frame_time();
  for (int t = 1; t < frame_count(); ++t) {
    const auto& a = states[t - 1];
    const auto& b = states[t];
    const double er = ((b.r - a.r) / h - b.r_dot).cwiseAbs().maxCoeff();
    const double ej = ((b.joints - a.joints) / h - b.joints_dot).cwiseAbs().maxCoeff();
    require(er <= vel_tol && ej <= vel_tol, ErrorKind::Precondition,
            "clip '" + name + "': velocities inconsistent with positions at frame " + std::to_string(t));
  }
}

void save_clip(const MotionClip& clip, const std::string& path, const std::string& skeleton_hash) {
  require(clip.contacts.rows() == clip.frame_count() && clip.contacts.cols() == kin::kContactCount,
          ErrorKind::LengthMismatch, "save_clip: contacts must be frames x 8");
  Container c;
  c.magic = kMotionMagic;
  c.version = kMotionVersion;
  c.type = PayloadType::Float32;
  c.meta = {{"name", clip.name},
            {"frame_rate", clip.frame_rate},
            {"frame_count", clip.frame_count()},
            {"skeleton_hash", skeleton_hash},
            {"shape", std::vector<double>(clip.shape.data(), clip.shape.data() + clip.shape.size())},
            {"generator", {{"name", clip.generator}, {"seed", clip.seed}}},
            {"frame_layout", {{"state", sl::kSize}, {"contacts", kin::kContactCount}}}};
  const int width = sl::kSize + kin::kContactCount;
  c.f32.resize(static_cast<std::size_t>(clip.frame_count()) * width);
  for (int t = 0; t < clip.frame_count(); ++t) {
    const Eigen::VectorXd v = clip.states[t].to_vector();
    float* row = c.f32.data() + static_cast<std::size_t>(t) * width;
    for (int i = 0; i < sl::kSize; ++i) row[i] = static_cast<float>(v[i]);
    for (int k = 0; k < kin::kContactCount; ++k) row[sl::kSize + k] = clip.contacts(t, k) > 0.5 ? 1.0f : 0.0f;
  }
  write_container(path, c);
}

MotionClip load_clip(const std::string& path, std::string* skeleton_hash) {
  const Container c = read_container(path, kMotionMagic, kMotionVersion);
  MotionClip clip;
  int frames = 0;
  try {
    clip.name = c.meta.value("name", std::string());
    clip.frame_rate = c.meta.at("frame_rate").get<double>();
    frames = c.meta.at("frame_count").get<int>();
    const auto shape = c.meta.at("shape").get<std::vector<double>>();
    require(static_cast<int>(shape.size()) == kin::kShapeDim, ErrorKind::Format, path + ": shape must have 16 entries");
    clip.shape = Eigen::Map<const Eigen::VectorXd>(shape.data(), kin::kShapeDim);
    if (c.meta.contains("generator")) {
      clip.generator = c.meta["generator"].value("name", std::string());
      clip.seed = c.meta["generator"].value("seed", std::uint64_t{0});
    }
    if (skeleton_hash) *skeleton_hash = c.meta.value("skeleton_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": metadata: " + e.what());
  }
  require(c.type == PayloadType::Float32, ErrorKind::Format, path + ": motion payload must be float32");
  require(frames >= 0, ErrorKind::Format, path + ": negative frame count");
  const int width = sl::kSize + kin::kContactCount;
  require(c.f32.size() == static_cast<std::size_t>(frames) * width, ErrorKind::LengthMismatch,
          path + ": payload holds " + std::to_string(c.f32.size()) + " values, expected " +
              std::to_string(static_cast<std::size_t>(frames) * width));
  clip.states.resize(frames);
  clip.contacts.resize(frames, kin::kContactCount);
  Eigen::VectorXd v(sl::kSize);
  for (int t = 0; t < frames; ++t) {
    const float* row = c.f32.data() + static_cast<std::size_t>(t) * width;
    for (int i = 0; i < sl::kSize; ++i) v[i] = row[i];
    clip.states[t] = kin::MotionState::from_vector(v);
    for (int k = 0; k < kin::kContactCount; ++k) clip.contacts(t, k) = row[sl::kSize + k];
  }
  return clip;
}

std::vector<kin::MotionState> sample_training_window(const std::vector<MotionClip>& dataset, std::mt19937_64& rng,
                                                     int length, int* clip_index, int* start) {
  require(!dataset.empty(), ErrorKind::Precondition, "sample_training_window: empty dataset");
  require(length >= 1, ErrorKind::Precondition, "sample_training_window: length must be positive");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(dataset.size()) - 1);
  const int ci = pick(rng);
  const MotionClip& clip = dataset[ci];
  require(clip.frame_count() >= length, ErrorKind::Precondition,
          "sample_training_window: clip '" + clip.name + "' shorter than window");
  std::uniform_int_distribution<int> off(0, clip.frame_count() - length);
  const int s = off(rng);
  if (clip_index) *clip_index = ci;
  if (start) *start = s;
  return {clip.states.begin() + s, clip.states.begin() + s + length};
}

}  // namespace motionprior::data
