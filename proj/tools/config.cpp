#include "config.hpp"

#include "motionprior/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace motionprior::cli {

void merge_into(nlohmann::json& dst, const nlohmann::json& src) {
  if (!dst.is_object() || !src.is_object()) {
    dst = src;
    return;
  }
  for (auto it = src.begin(); it != src.end(); ++it) {
    if (dst.contains(it.key()) && dst[it.key()].is_object() && it.value().is_object())
      merge_into(dst[it.key()], it.value());
    else
      dst[it.key()] = it.value();
  }
}

namespace {

nlohmann::json parse_value(const std::string& s) {
  try {
    return nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception&) {
    return s;
  }
}

void set_path(nlohmann::json& cfg, std::string key, const nlohmann::json& value) {
  std::replace(key.begin(), key.end(), '-', '_');
  nlohmann::json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!part.empty(), ErrorKind::Config, "bad override key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!(*node)[part].is_object()) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

void apply_overrides(nlohmann::json& cfg, const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    require(t.rfind("--", 0) == 0 && t.size() > 2, ErrorKind::Config, "unexpected argument '" + t + "'");
    std::string key = t.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      set_path(cfg, key.substr(0, eq), parse_value(key.substr(eq + 1)));
    } else if (i + 1 < tokens.size() && tokens[i + 1].rfind("--", 0) != 0) {
      set_path(cfg, key, parse_value(tokens[++i]));
    } else {
      set_path(cfg, key, true);
    }
  }
}

nlohmann::json build_config(const nlohmann::json& defaults, const std::string& config_path,
                            const std::vector<std::string>& overrides) {
  nlohmann::json cfg = defaults;
  if (!config_path.empty()) merge_into(cfg, read_json_file(config_path));
  apply_overrides(cfg, overrides);
  if (const char* s = std::getenv("MOTIONPRIOR_SEED"); s && *s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    require(end && *end == '\0', ErrorKind::Config, "MOTIONPRIOR_SEED is not an integer");
    cfg["seed"] = v;
  }
  return cfg;
}

kin::Skeleton skeleton_of(const nlohmann::json& cfg) {
  const std::string p = cfg.value("skeleton", std::string());
  return p.empty() ? kin::Skeleton::default_humanoid() : kin::Skeleton::load(p);
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

std::string str(const nlohmann::json& cfg, const std::string& key) {
  require(cfg.contains(key) && cfg[key].is_string() && !cfg[key].get<std::string>().empty(), ErrorKind::Config,
          "missing '" + key + "'");
  return cfg[key].get<std::string>();
}

}  // namespace motionprior::cli
