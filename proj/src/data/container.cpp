#include "motionprior/data/container.hpp"

#include "motionprior/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace motionprior::data {

static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");

namespace {

template <class T>
void put(std::vector<char>& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

template <class T>
T get(const std::vector<char>& buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

}  // namespace

void write_container(const std::string& path, const Container& c) {
  require(!c.magic.empty() && c.magic.size() <= 8, ErrorKind::Format, "container magic must be 1..8 bytes");
  const std::string js = c.meta.dump();
  std::vector<char> header(kHeaderSize, 0);
  std::memcpy(header.data(), c.magic.data(), c.magic.size());
  put<std::uint32_t>(header, 8, c.version);
  put<std::uint32_t>(header, 12, 0);
  put<std::uint64_t>(header, 16, js.size());
  put<std::uint64_t>(header, 24, c.payload_count());
  put<std::uint32_t>(header, 32, static_cast<std::uint32_t>(c.type));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  if (c.type == PayloadType::Float32)
    out.write(reinterpret_cast<const char*>(c.f32.data()), static_cast<std::streamsize>(c.f32.size() * 4));
  else
    out.write(reinterpret_cast<const char*>(c.f64.data()), static_cast<std::streamsize>(c.f64.size() * 8));
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

Container read_container(const std::string& path, const std::string& magic, std::uint32_t version) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(bytes.size() >= kHeaderSize, ErrorKind::Format, path + ": truncated header");
  Container c;
  c.magic.assign(bytes.data(), bytes.data() + 8);
  c.magic.erase(c.magic.find_last_not_of('\0') + 1);
  require(c.magic == magic, ErrorKind::Format, path + ": bad magic '" + c.magic + "', expected '" + magic + "'");
  c.version = get<std::uint32_t>(bytes, 8);
  require(c.version == version, ErrorKind::VersionMismatch,
          path + ": version " + std::to_string(c.version) + ", expected " + std::to_string(version));
  const auto json_len = get<std::uint64_t>(bytes, 16);
  const auto count = get<std::uint64_t>(bytes, 24);
  const auto type = get<std::uint32_t>(bytes, 32);
  require(type == 1 || type == 2, ErrorKind::Format, path + ": unknown payload type");
  for (std::size_t i = 36; i < kHeaderSize; ++i)
    require(bytes[i] == 0, ErrorKind::Format, path + ": header padding not zero");
  c.type = static_cast<PayloadType>(type);
  require(json_len <= bytes.size() - kHeaderSize, ErrorKind::LengthMismatch, path + ": metadata truncated");
  const std::size_t width = c.type == PayloadType::Float32 ? 4 : 8;
  const std::size_t expect = kHeaderSize + json_len + count * width;
  require(bytes.size() == expect, ErrorKind::LengthMismatch,
          path + ": payload size " + std::to_string(bytes.size() - kHeaderSize - json_len) + " bytes, header says " +
              std::to_string(count * width));
  try {
    c.meta = nlohmann::json::parse(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + json_len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": metadata: " + e.what());
  }
  const char* p = bytes.data() + kHeaderSize + json_len;
  if (c.type == PayloadType::Float32) {
    c.f32.resize(count);
    std::memcpy(c.f32.data(), p, count * 4);
  } else {
    c.f64.resize(count);
    std::memcpy(c.f64.data(), p, count * 8);
  }
  return c;
}

}  // namespace motionprior::data
