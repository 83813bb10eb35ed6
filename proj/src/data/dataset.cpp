#include "motionprior/data/dataset.hpp"

#include "motionprior/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

namespace motionprior::data {

namespace fs = std::filesystem;

DatasetSplit split_dataset(const std::vector<MotionClip>& clips, std::uint64_t seed, double val_fraction,
                           double test_fraction) {
  require(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0, ErrorKind::Config,
          "split fractions must be non-negative and sum below 1");
  std::map<std::string, std::vector<std::size_t>> by_family;
  for (std::size_t i = 0; i < clips.size(); ++i) by_family[clips[i].generator].push_back(i);
  DatasetSplit out;
  std::mt19937_64 rng(seed);
  for (auto& [family, idx] : by_family) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = idx.size();
    auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
    if (n >= 3 && test_fraction > 0.0) n_test = std::max<std::size_t>(n_test, 1);
    if (n >= 3 && val_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    for (std::size_t k = 0; k < n; ++k) {
      const MotionClip& c = clips[idx[k]];
      if (k < n_test)
        out.test.push_back(c);
      else if (k < n_test + n_val)
        out.val.push_back(c);
      else
        out.train.push_back(c);
    }
  }
  return out;
}

nlohmann::json write_dataset(const std::string& dir, const DatasetSplit& split, const kin::Skeleton& skel,
                             const nlohmann::json& extra_meta) {
  const std::string hash = skel.hash();
  nlohmann::json manifest = extra_meta;
  manifest["skeleton_hash"] = hash;
  manifest["format"] = "motionprior-dataset";
  auto write = [&](const std::string& name, const std::vector<MotionClip>& clips) {
    const fs::path sub = fs::path(dir) / name;
    fs::create_directories(sub);
    nlohmann::json list = nlohmann::json::array();
    for (const MotionClip& c : clips) {
      const std::string file = c.name + ".motion";
      save_clip(c, (sub / file).string(), hash);
      list.push_back({{"file", name + "/" + file}, {"frames", c.frame_count()}, {"family", c.generator},
                      {"seed", c.seed}});
    }
    manifest["splits"][name] = list;
  };
  write("train", split.train);
  write("val", split.val);
  write("test", split.test);
  std::ofstream out(fs::path(dir) / "manifest.json");
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
  return manifest;
}

std::vector<MotionClip> load_split(const std::string& dir, const std::string& split,
                                   const std::string& expect_skeleton_hash) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream in(mpath);
  require(static_cast<bool>(in), ErrorKind::Io, "dataset manifest not found: " + mpath.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, mpath.string() + ": " + e.what());
  }
  require(m.contains("splits") && m["splits"].contains(split), ErrorKind::Format,
          mpath.string() + ": no split '" + split + "'");
  std::vector<MotionClip> clips;
  for (const auto& e : m["splits"][split]) {
    std::string h;
    clips.push_back(load_clip((fs::path(dir) / e.at("file").get<std::string>()).string(), &h));
    if (!expect_skeleton_hash.empty())
      require(h == expect_skeleton_hash, ErrorKind::Config,
              "clip " + e.at("file").get<std::string>() + " was made with a different skeleton");
  }
  return clips;
}

}  // namespace motionprior::data
