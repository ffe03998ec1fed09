#pragma once

// "AFPD" v1 dataset container:
//   magic "AFPD" | u16 version | u16 endianness tag (0x0001)
//   u32 sample count | u32 height | u32 width
//   u32 length + JSON provenance
//   per sample: h*w f32 depth values, then h*w u8 labels

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afpseg/binary_io.hpp"
#include "afpseg/config.hpp"
#include "afpseg/error.hpp"
#include "afpseg/raster.hpp"
#include "afpseg/render.hpp"
#include "afpseg/scene.hpp"
#include "afpseg/texture.hpp"
#include "afpseg/threading.hpp"

namespace afpseg {

inline constexpr std::uint16_t kDatasetVersion = 1;

/// Which texture pool a dataset was rendered with.
struct TextureSpec {
  std::string directory;  // empty: procedural value noise
  ValueNoiseDescriptor noise;
  int pool = kProceduralTexturePool;

  TextureSource make_source() const {
    return directory.empty() ? TextureSource::procedural(noise, pool) : TextureSource::directory(directory);
  }

  bool operator==(const TextureSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const TextureSpec& t) {
  if (!t.directory.empty()) {
    j = nlohmann::json{{"kind", "directory"}, {"path", t.directory}};
    return;
  }
  j = nlohmann::json{{"kind", "procedural"},
                     {"octaves", t.noise.octaves},
                     {"base_frequency", t.noise.base_frequency},
                     {"seed", t.noise.seed},
                     {"pool", t.pool}};
}

inline void from_json(const nlohmann::json& j, TextureSpec& t) {
  if (!j.is_object()) throw ConfigError("textures: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") {
        const auto kind = v.get<std::string>();
        if (kind != "procedural" && kind != "directory") throw ConfigError("textures: unknown kind '" + kind + "'");
      } else if (key == "path") t.directory = v.get<std::string>();
      else if (key == "octaves") t.noise.octaves = v.get<int>();
      else if (key == "base_frequency") t.noise.base_frequency = v.get<double>();
      else if (key == "seed") t.noise.seed = v.get<std::uint64_t>();
      else if (key == "pool") t.pool = v.get<int>();
      else throw ConfigError("textures: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("textures: ") + e.what());
  }
}

struct Provenance {
  GeneratorConfig generator;
  std::uint64_t seed = 0;
  std::uint32_t count = 0;
  TextureSpec textures;

  bool operator==(const Provenance&) const = default;
};

inline void to_json(nlohmann::json& j, const Provenance& p) {
  j = nlohmann::json{{"generator", p.generator}, {"seed", p.seed}, {"count", p.count}, {"textures", p.textures}};
}

inline void from_json(const nlohmann::json& j, Provenance& p) {
  p.generator = j.at("generator").get<GeneratorConfig>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.count = j.at("count").get<std::uint32_t>();
  if (j.contains("textures")) p.textures = j.at("textures").get<TextureSpec>();
}

/// Seed of sample `index` in a dataset with base seed `seed`.
inline constexpr std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) noexcept { return seed ^ index; }

inline TrainingExample generate_example(const GeneratorConfig& config, std::uint64_t seed, std::uint64_t index,
                                        const TextureSource& textures) {
  return render_scene(sample_scene(config, sample_seed(seed, index), textures.count()), textures);
}

/// One sample as stored on disk.
struct StoredSample {
  std::vector<float> depth;
  std::vector<std::uint8_t> labels;
};

struct DatasetHeader {
  std::uint32_t count = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  nlohmann::json provenance;
};

/// Renders `count` scenes and streams them into an AFPD file. Rendering runs
/// on up to `threads` workers in chunks; writes stay in sample order.
inline void generate_dataset(const GeneratorConfig& config, std::uint32_t count, std::uint64_t seed,
                             const std::string& path, const TextureSpec& textures = {}, int threads = 1) {
  config.validate();
  const auto source = textures.make_source();
  auto os = io::open_out(path);
  io::Writer w(os, path);
  w.magic("AFPD");
  w.u16(kDatasetVersion);
  w.u16(io::kLittleEndianTag);
  w.u32(count);
  w.u32(static_cast<std::uint32_t>(config.height_px));
  w.u32(static_cast<std::uint32_t>(config.width_px));
  w.string_u32(nlohmann::json(Provenance{config, seed, count, textures}).dump());

  const std::size_t chunk = static_cast<std::size_t>(std::max(threads, 1)) * 8;
  std::vector<StoredSample> buffer;
  for (std::size_t begin = 0; begin < count; begin += chunk) {
    const std::size_t n = std::min<std::size_t>(chunk, count - begin);
    buffer.assign(n, {});
    parallel_for(n, threads, [&](std::size_t k) {
      const auto ex = generate_example(config, seed, begin + k, source);
      buffer[k].depth.assign(ex.x.values().begin(), ex.x.values().end());
      buffer[k].labels.assign(ex.y.values().begin(), ex.y.values().end());
    });
    for (const auto& s : buffer) {
      w.floats(s.depth);
      w.bytes(s.labels.data(), s.labels.size());
    }
  }
  os.flush();
  if (!os) throw FileError(path, "write failed");
}

/// Random access to the samples of an AFPD file.
class DatasetFile {
 public:
  explicit DatasetFile(const std::string& path) : path_(path), is_(io::open_in(path)) {
    io::Reader r(is_, path_);
    r.expect_magic("AFPD");
    const auto version = r.u16();
    if (version != kDatasetVersion) throw FileError(path_, "unsupported dataset version " + std::to_string(version));
    if (r.u16() != io::kLittleEndianTag) throw FileError(path_, "unsupported endianness tag");
    header_.count = r.u32();
    header_.height = r.u32();
    header_.width = r.u32();
    try {
      header_.provenance = nlohmann::json::parse(r.string_u32());
    } catch (const nlohmann::json::exception& e) {
      throw FileError(path_, std::string("bad provenance block: ") + e.what());
    }
    data_start_ = is_.tellg();
    is_.seekg(0, std::ios::end);
    const auto expected = static_cast<std::streamoff>(data_start_) +
                          static_cast<std::streamoff>(header_.count) * static_cast<std::streamoff>(sample_bytes());
    if (is_.tellg() != expected) throw FileError(path_, "file size does not match the header");
  }

  const DatasetHeader& header() const noexcept { return header_; }
  std::uint32_t size() const noexcept { return header_.count; }
  int height() const noexcept { return static_cast<int>(header_.height); }
  int width() const noexcept { return static_cast<int>(header_.width); }
  const std::string& path() const noexcept { return path_; }

  std::optional<Provenance> provenance() const {
    try {
      return header_.provenance.get<Provenance>();
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  StoredSample read(std::uint32_t index) {
    if (index >= header_.count) throw FileError(path_, "sample index " + std::to_string(index) + " out of range");
    const std::size_t pixels = static_cast<std::size_t>(header_.height) * header_.width;
    is_.clear();
    is_.seekg(data_start_ + static_cast<std::streamoff>(index) * static_cast<std::streamoff>(sample_bytes()));
    io::Reader r(is_, path_);
    StoredSample s{std::vector<float>(pixels), std::vector<std::uint8_t>(pixels)};
    r.floats(s.depth);
    r.bytes(s.labels.data(), pixels);
    return s;
  }

 private:
  std::size_t sample_bytes() const {
    return static_cast<std::size_t>(header_.height) * header_.width * (sizeof(float) + 1);
  }

  std::string path_;
  std::ifstream is_;
  DatasetHeader header_;
  std::streampos data_start_{};
};

inline DepthMap to_depth_map(const StoredSample& s, int height, int width) {
  DepthMap d(height, width);
  std::copy(s.depth.begin(), s.depth.end(), d.values().begin());
  return d;
}

inline LabelMap to_label_map(const StoredSample& s, int height, int width) {
  LabelMap l(height, width);
  std::copy(s.labels.begin(), s.labels.end(), l.values().begin());
  return l;
}

}  // namespace afpseg
