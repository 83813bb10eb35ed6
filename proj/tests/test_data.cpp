#include "motionprior/data/clip.hpp"
#include "motionprior/data/container.hpp"
#include "motionprior/data/dataset.hpp"
#include "motionprior/data/synthetic.hpp"
#include "motionprior/error.hpp"
#include "motionprior/kin/motion.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

using namespace motionprior;
using namespace motionprior::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticSpec walk_spec(int n, double dur) {
  SyntheticSpec s;
  s.families.push_back({"walk-cycle", n, dur});
  return s;
}

bool clips_identical(const MotionClip& a, const MotionClip& b) {
  if (a.frame_count() != b.frame_count()) return false;
  for (int t = 0; t < a.frame_count(); ++t) {
    const Eigen::VectorXd va = a.states[t].to_vector(), vb = b.states[t].to_vector();
    if (std::memcmp(va.data(), vb.data(), sizeof(double) * va.size()) != 0) return false;
  }
  return a.contacts == b.contacts && a.shape == b.shape;
}

MotionClip tiny_clip(int frames, const std::string& name) {
  MotionClip c;
  c.name = name;
  c.states.resize(frames);
  for (int t = 0; t < frames; ++t) c.states[t].r = Eigen::Vector3d(t, 0, 0.9);
  kin::fill_velocities(c.states, c.frame_time());
  c.contacts = Eigen::MatrixXd::Zero(frames, kin::kContactCount);
  return c;
}

}  // namespace

TEST_CASE("synthetic walk clips have the requested frame count") {
  const auto clips = generate_synthetic(1, walk_spec(5, 3.0));
  REQUIRE(clips.size() == 5);
  for (const auto& c : clips) {
    CHECK(c.frame_count() == 90);
    CHECK(c.contacts.rows() == 90);
    CHECK(c.contacts.cols() == 8);
  }
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SyntheticSpec spec;
  for (const auto& f : known_families()) spec.families.push_back({f, 2, 2.0});
  const auto a = generate_synthetic(7, spec);
  const auto b = generate_synthetic(7, spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(clips_identical(a[i], b[i]));
  const auto c = generate_synthetic(8, spec);
  CHECK_FALSE(clips_identical(a[0], c[0]));
}

TEST_CASE("generated clips satisfy the clip invariants") {
  SyntheticSpec spec;
  for (const auto& f : known_families()) spec.families.push_back({f, 3, 3.0});
  const auto clips = generate_synthetic(3, spec);
  const auto skel = kin::Skeleton::default_humanoid();
  for (const auto& c : clips) {
    CAPTURE(c.name);
    CHECK_NOTHROW(c.validate());
    // contacts agree with a fresh annotation of the joints
    std::vector<kin::JointMat> joints;
    for (const auto& s : c.states) joints.push_back(s.joints);
    CHECK(kin::annotate_contacts(joints, skel) == c.contacts);
    for (const auto& s : c.states) {
      CHECK(s.joints.col(2).minCoeff() > -1e-6);  // above the floor
    }
  }
}

TEST_CASE("idle clips keep the toes planted") {
  SyntheticSpec spec;
  spec.families.push_back({"idle-sway", 4, 3.0});
  for (const auto& c : generate_synthetic(11, spec)) {
    const double toe_frac = 0.5 * (c.contacts.col(0).mean() + c.contacts.col(1).mean());
    CHECK(toe_frac > 0.9);
  }
}

TEST_CASE("clip variation is optional, valid and deterministic") {
  const auto& skel = kin::Skeleton::default_humanoid();
  ClipVariation off;
  const MotionClip base = generate_clip("walk-cycle", 2.0, 30.0, 1.0, 1.0, 77, skel);
  const MotionClip same = generate_clip("walk-cycle", 2.0, 30.0, 1.0, 1.0, 77, skel, off);
  for (std::size_t t = 0; t < base.states.size(); ++t) CHECK(base.states[t].to_vector() == same.states[t].to_vector());

  ClipVariation var;
  var.tempo = 0.15;
  var.pose = 0.1;
  for (const auto& f : known_families()) {
    CAPTURE(f);
    const MotionClip a = generate_clip(f, 3.0, 30.0, 1.0, 1.0, 5, skel, var);
    const MotionClip b = generate_clip(f, 3.0, 30.0, 1.0, 1.0, 5, skel, var);
    const MotionClip c = generate_clip(f, 3.0, 30.0, 1.0, 1.0, 5, skel);
    CHECK_NOTHROW(a.validate());
    CHECK(a.states.back().to_vector() == b.states.back().to_vector());
    CHECK((a.states.back().theta - c.states.back().theta).norm() > 1e-3);
    for (const auto& s : a.states) CHECK(s.joints.col(2).minCoeff() > -1e-6);
  }
  // varied idle motion still stands still on its toes
  const MotionClip idle = generate_clip("idle-sway", 3.0, 30.0, 1.0, 1.0, 9, skel, var);
  CHECK(0.5 * (idle.contacts.col(0).mean() + idle.contacts.col(1).mean()) > 0.9);

  ClipVariation bad;
  bad.tempo = 0.7;
  CHECK_THROWS_AS(generate_clip("squat", 1.0, 30.0, 1.0, 1.0, 1, skel, bad), Error);
  SyntheticSpec spec;
  spec.variation = var;
  CHECK(SyntheticSpec::from_json(spec.to_json()).variation.pose == 0.1);
}

TEST_CASE("unknown family is a configuration error") {
  SyntheticSpec spec;
  spec.families.push_back({"moonwalk", 1, 1.0});
  try {
    generate_synthetic(1, spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("clip files round trip and have the expected payload size") {
  const auto dir = temp_dir("clip");
  MotionClip c = generate_synthetic(1, walk_spec(1, 3.0))[0];
  // make the in-memory copy float32 representable so the round trip is exact
  for (auto& s : c.states) s = kin::MotionState::from_vector(s.to_vector().cast<float>().cast<double>());
  const std::string path = (dir / "a.motion").string();
  save_clip(c, path, "abc");
  std::string hash;
  const MotionClip d = load_clip(path, &hash);
  CHECK(hash == "abc");
  CHECK(clips_identical(c, d));
  CHECK(d.generator == c.generator);
  CHECK(d.seed == c.seed);

  const Container raw = read_container(path, kMotionMagic, kMotionVersion);
  CHECK(raw.type == PayloadType::Float32);
  CHECK(raw.f32.size() == 90u * (207u + 8u));
  CHECK(raw.meta.at("frame_rate").get<double>() == 30.0);
  CHECK(raw.meta.at("frame_count").get<int>() == 90);
}

TEST_CASE("clip file errors") {
  const auto dir = temp_dir("clip_err");
  const std::string path = (dir / "a.motion").string();
  save_clip(tiny_clip(12, "t"), path, "h");
  const auto size = fs::file_size(path);

  SUBCASE("truncated payload") {
    fs::resize_file(path, size - 7);
    try {
      load_clip(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LengthMismatch);
    }
  }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
    f.close();
    try {
      load_clip(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  }
  SUBCASE("version mismatch") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.close();
    try {
      load_clip(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::VersionMismatch);
    }
  }
}

TEST_CASE("training window sampling") {
  std::mt19937_64 rng(5);
  SUBCASE("single clip of exactly the window length") {
    std::vector<MotionClip> ds{tiny_clip(10, "a")};
    for (int k = 0; k < 20; ++k) {
      int ci = -1, st = -1;
      const auto w = sample_training_window(ds, rng, 10, &ci, &st);
      REQUIRE(w.size() == 10);
      CHECK(st == 0);
      for (int t = 0; t < 10; ++t) CHECK(w[t].r.x() == doctest::Approx(t));
    }
  }
  SUBCASE("clips are chosen uniformly") {
    std::vector<MotionClip> ds{tiny_clip(30, "a"), tiny_clip(30, "b")};
    int count0 = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
      int ci = -1;
      sample_training_window(ds, rng, 10, &ci);
      count0 += ci == 0;
    }
    CHECK(std::abs(count0 / double(n) - 0.5) < 0.02);
  }
  SUBCASE("window longer than a clip is rejected") {
    std::vector<MotionClip> ds{tiny_clip(8, "a")};
    CHECK_THROWS_AS(sample_training_window(ds, rng, 10), Error);
  }
  SUBCASE("empty dataset is rejected") {
    std::vector<MotionClip> ds;
    CHECK_THROWS_AS(sample_training_window(ds, rng, 10), Error);
  }
  SUBCASE("fuzzed lengths stay in bounds") {
    std::vector<MotionClip> ds;
    std::uniform_int_distribution<int> len(12, 40);
    for (int i = 0; i < 6; ++i) ds.push_back(tiny_clip(len(rng), "c" + std::to_string(i)));
    std::uniform_int_distribution<int> wl(1, 12);
    for (int k = 0; k < 2000; ++k) {
      const int L = wl(rng);
      int ci = -1, st = -1;
      const auto w = sample_training_window(ds, rng, L, &ci, &st);
      REQUIRE(w.size() == static_cast<std::size_t>(L));
      CHECK(st >= 0);
      CHECK(st + L <= ds[ci].frame_count());
      CHECK(w[0].r.x() == doctest::Approx(st));
    }
  }
}

TEST_CASE("dataset split is disjoint, covering and deterministic") {
  SyntheticSpec spec;
  spec.families.push_back({"walk-cycle", 10, 1.0});
  spec.families.push_back({"squat", 10, 1.0});
  const auto clips = generate_synthetic(2, spec);
  const auto a = split_dataset(clips, 9);
  const auto b = split_dataset(clips, 9);
  CHECK(a.train.size() + a.val.size() + a.test.size() == clips.size());
  CHECK(a.val.size() == 2);
  CHECK(a.test.size() == 2);
  std::set<std::string> names;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& c : *part) names.insert(c.name);
  CHECK(names.size() == clips.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].name == b.train[i].name);

  const auto dir = temp_dir("dataset");
  const auto skel = kin::Skeleton::default_humanoid();
  write_dataset(dir.string(), a, skel, {{"seed", 2}});
  const auto val = load_split(dir.string(), "val", skel.hash());
  REQUIRE(val.size() == a.val.size());
  CHECK(val[0].name == a.val[0].name);
  CHECK_THROWS_AS(load_split(dir.string(), "val", "other-hash"), Error);
  CHECK_THROWS_AS(load_split(dir.string(), "nope"), Error);
}
