#pragma once

// Texture sources blended over the depth maps: a directory of grayscale
// images, or seeded multi-octave value noise when no images are supplied.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "afpseg/error.hpp"
#include "afpseg/png_io.hpp"
#include "afpseg/raster.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/scene.hpp"

namespace afpseg {

struct ValueNoiseDescriptor {
  int octaves = 5;
  double base_frequency = 1.0 / 32.0;  // cycles per pixel of the first octave
  std::uint64_t seed = 0;

  bool operator==(const ValueNoiseDescriptor&) const = default;
};

namespace detail {

inline double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t key) noexcept {
  const std::uint64_t h = splitmix64(key ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull ^
                                                      static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double smoothstep(double t) noexcept { return t * t * (3.0 - 2.0 * t); }

inline double value_noise(double x, double y, std::uint64_t key) noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double u = smoothstep(x - fx);
  const double v = smoothstep(y - fy);
  const double a = lattice_value(ix, iy, key);
  const double b = lattice_value(ix + 1, iy, key);
  const double c = lattice_value(ix, iy + 1, key);
  const double d = lattice_value(ix + 1, iy + 1, key);
  return (a + (b - a) * u) + ((c + (d - c) * u) - (a + (b - a) * u)) * v;
}

}  // namespace detail

/// Multi-octave value noise sampled at pixel centers of the window starting at
/// (origin_row, origin_col). Octave k has frequency base * 2^k and amplitude
/// 2^-k; the sum is divided by the total amplitude, so output stays in [0,1].
inline Raster<double> procedural_texture(int width, int height, const ValueNoiseDescriptor& desc,
                                         double origin_row = 0.0, double origin_col = 0.0) {
  if (desc.octaves < 1) throw ConfigError("value noise needs at least one octave");
  Raster<double> out(height, width, 0.0);
  double total = 0.0;
  double amplitude = 1.0;
  double frequency = desc.base_frequency;
  for (int k = 0; k < desc.octaves; ++k) {
    const std::uint64_t key = derive_stream(desc.seed, static_cast<std::uint64_t>(k));
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        out(r, c) += amplitude * detail::value_noise((origin_col + c + 0.5) * frequency,
                                                     (origin_row + r + 0.5) * frequency, key);
    total += amplitude;
    amplitude *= 0.5;
    frequency *= 2.0;
  }
  for (auto& v : out.values()) v = std::clamp(v / total, 0.0, 1.0);
  return out;
}

namespace detail {

struct ProceduralPool {
  ValueNoiseDescriptor desc;
  int pool = kProceduralTexturePool;
};

}  // namespace detail

/// Pool of grayscale textures addressed by integer id.
class TextureSource {
 public:
  /// Procedural fallback: `pool` virtual textures, id k seeded from (seed, k).
  static TextureSource procedural(ValueNoiseDescriptor desc = {}, int pool = kProceduralTexturePool) {
    if (pool <= 0) throw ConfigError("procedural texture pool must be non-empty");
    return TextureSource(Procedural{desc, pool});
  }

  /// Every *.png in `dir` (sorted by file name), converted to [0,1] gray.
  static TextureSource directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw FileError(dir, "texture directory not found");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return from_images([&] {
      std::vector<Raster<double>> images;
      for (const auto& f : files) images.push_back(png::read_gray(f.string()));
      return images;
    }());
  }

  static TextureSource from_images(std::vector<Raster<double>> images) {
    return TextureSource(std::move(images));
  }

  int count() const {
    if (const auto* p = std::get_if<Procedural>(&source_)) return p->pool;
    return static_cast<int>(std::get<Images>(source_).size());
  }

  bool is_procedural() const { return std::holds_alternative<Procedural>(source_); }

  const ValueNoiseDescriptor* descriptor() const {
    const auto* p = std::get_if<Procedural>(&source_);
    return p ? &p->desc : nullptr;
  }

  /// height x width window of texture `id`; `offset` in [0,1)^2 selects the
  /// window position within the image (x -> columns, y -> rows).
  Raster<double> crop(int id, Point2 offset, int height, int width) const {
    if (id < 0 || id >= count()) throw ConfigError("texture id out of range");
    if (const auto* p = std::get_if<Procedural>(&source_)) {
      ValueNoiseDescriptor d = p->desc;
      d.seed = derive_stream(p->desc.seed, static_cast<std::uint64_t>(id));
      return procedural_texture(width, height, d, std::floor(offset.y * kProceduralExtent),
                                std::floor(offset.x * kProceduralExtent));
    }
    const auto& img = std::get<Images>(source_)[id];
    if (img.height() < height || img.width() < width)
      throw ConfigError("texture " + std::to_string(id) + " is smaller than the canvas");
    const int r0 = static_cast<int>(offset.y * (img.height() - height + 1));
    const int c0 = static_cast<int>(offset.x * (img.width() - width + 1));
    Raster<double> out(height, width);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) out(r, c) = img(r0 + r, c0 + c);
    return out;
  }

 private:
  static constexpr double kProceduralExtent = 4096.0;

  using Procedural = detail::ProceduralPool;
  using Images = std::vector<Raster<double>>;

  explicit TextureSource(std::variant<Procedural, Images> source) : source_(std::move(source)) {}

  std::variant<Procedural, Images> source_;
};

}  // namespace afpseg
