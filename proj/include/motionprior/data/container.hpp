#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace motionprior::data {

// Binary container shared by motion, checkpoint and mixture files:
//   64-byte header: magic[8], u32 version, u32 reserved, u64 json_len,
//   u64 payload_count, u32 payload_type, zero padding;
//   then json_len bytes of UTF-8 JSON; then payload_count little-endian scalars.
inline constexpr std::size_t kHeaderSize = 64;

enum class PayloadType : std::uint32_t { Float32 = 1, Float64 = 2 };

struct Container {
  std::string magic;
  std::uint32_t version = 1;
  nlohmann::json meta;
  PayloadType type = PayloadType::Float32;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t payload_count() const { return type == PayloadType::Float32 ? f32.size() : f64.size(); }
};

void write_container(const std::string& path, const Container& c);

/// Reads and validates a container. Throws format errors for a bad header or
/// magic, version-mismatch errors when `version` differs, and length-mismatch
/// errors when the file size disagrees with the header.
Container read_container(const std::string& path, const std::string& magic, std::uint32_t version);

}  // namespace motionprior::data
