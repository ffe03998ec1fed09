#pragma once

#include <cstdint>
#include <optional>

#include "afpseg/config.hpp"
#include "afpseg/error.hpp"
#include "afpseg/raster.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/scene.hpp"
#include "afpseg/texture.hpp"

namespace afpseg {

struct TrainingExample {
  DepthMap x;                // observable depth map
  LabelMap y;                // ground truth
  std::optional<DepthMap> z; // clean depth map, kept for diagnostics
};

/// x = z + ramp + texture + noise; z itself is left untouched.
///   ramp(col)  = R * (col - width / 2)
///   texture(p) = texture_alpha * (T(p) - 0.5), T the top texture where
///                top_mask is set and the bottom texture elsewhere
///   noise      ~ N(0, noise_sigma^2) per pixel from noise_seed
inline DepthMap apply_nuisance(const DepthMap& z, const Mask& top_mask, const NuisanceParams& nuisance,
                               const TextureSource& textures, const GeneratorConfig& config) {
  const int h = z.height();
  const int w = z.width();
  if (!top_mask.same_extents(z)) throw ShapeError("apply_nuisance: mask extents differ from depth map");
  DepthMap x = z;
  const double half = w / 2.0;
  if (nuisance.ramp_slope != 0.0)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) x(r, c) += nuisance.ramp_slope * (c - half);

  if (config.texture_alpha != 0.0) {
    const auto top = textures.crop(nuisance.texture_top_id, nuisance.texture_top_offset, h, w);
    const auto bottom = textures.crop(nuisance.texture_bottom_id, nuisance.texture_bottom_offset, h, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = top_mask.values()[i] ? top.values()[i] : bottom.values()[i];
      x.values()[i] += config.texture_alpha * (t - 0.5);
    }
  }

  if (config.noise_sigma > 0.0) {
    Rng rng(nuisance.noise_seed);
    for (auto& v : x.values()) v += rng.normal(0.0, config.noise_sigma);
  }
  return x;
}

/// Tows, then fuzzball, then nuisance. Labels are final before the nuisance
/// layer runs.
inline TrainingExample render_scene(const SceneSample& scene, const TextureSource& textures) {
  auto tows = rasterize_tows(scene.grid, scene.config);
  if (scene.fuzzball) render_fuzzball(*scene.fuzzball, tows.z, tows.y);
  TrainingExample ex;
  ex.x = apply_nuisance(tows.z, tows.top_mask, scene.nuisance, textures, scene.config);
  ex.y = std::move(tows.y);
  ex.z = std::move(tows.z);
  return ex;
}

}  // namespace afpseg
