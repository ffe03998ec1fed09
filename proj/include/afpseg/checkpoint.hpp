#pragma once

// "AFPW" v1 checkpoint:
//   magic "AFPW" | u16 version | u16 endianness tag (0x0001)
//   u32 length + JSON NetworkConfig
//   per parameter: u16 length + UTF-8 name | u8 rank | u32 extent * rank | f32 data

#include <cstdint>
#include <string>

#include <json.hpp>

#include "afpseg/binary_io.hpp"
#include "afpseg/error.hpp"
#include "afpseg/network.hpp"

namespace afpseg {

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const nn::Network<float>& net) {
  auto os = io::open_out(path);
  io::Writer w(os, path);
  w.magic("AFPW");
  w.u16(kCheckpointVersion);
  w.u16(io::kLittleEndianTag);
  w.string_u32(nlohmann::json(net.config()).dump());
  for (const auto& p : net.parameters()) {
    w.string_u16(p.name);
    w.u8(static_cast<std::uint8_t>(p.value.rank()));
    for (int e : p.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    w.floats(p.value.values());
  }
  os.flush();
  if (!os) throw FileError(path, "write failed");
}

inline nn::Network<float> load_checkpoint(const std::string& path) {
  auto is = io::open_in(path);
  io::Reader r(is, path);
  r.expect_magic("AFPW");
  const auto version = r.u16();
  if (version != kCheckpointVersion) throw FileError(path, "unsupported checkpoint version " + std::to_string(version));
  if (r.u16() != io::kLittleEndianTag) throw FileError(path, "unsupported endianness tag");
  nn::NetworkConfig config;
  try {
    config = nlohmann::json::parse(r.string_u32()).get<nn::NetworkConfig>();
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw FileError(path, std::string("bad network config block: ") + e.what());
  } catch (const ConfigError& e) {
    throw FileError(path, e.what());
  }
  nn::Network<float> net(config);
  for (auto& p : net.parameters()) {
    if (r.at_eof()) throw FileError(path, "missing parameter " + p.name);
    const auto name = r.string_u16();
    if (name != p.name) throw FileError(path, "expected parameter " + p.name + ", found " + name);
    const int rank = r.u8();
    nn::Shape shape(rank);
    for (auto& e : shape) e = static_cast<int>(r.u32());
    if (shape != p.value.shape())
      throw FileError(path, "parameter " + name + " has shape " + nn::to_string(shape) + ", expected " +
                                nn::to_string(p.value.shape()));
    r.floats(p.value.values());
  }
  if (!r.at_eof()) throw FileError(path, "trailing data after last parameter");
  return net;
}

}  // namespace afpseg
