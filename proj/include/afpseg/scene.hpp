#pragma once

// Latent layers of the scene model: global parameters, tow control grid,
// fuzzball fibers and nuisance parameters. Everything here is a pure
// function of (config, random stream).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "afpseg/config.hpp"
#include "afpseg/error.hpp"
#include "afpseg/rng.hpp"

namespace afpseg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

struct ControlGrid {
  int columns = 0;
  int rows = 0;
  double spacing = 0.0;  // tow width t
  Point2 origin;         // base lattice position of (row 0, col 0)
  std::vector<Point2> points;  // row-major, rows x columns
  std::optional<int> shifted_column;
  std::optional<double> shift_px;

  const Point2& at(int row, int col) const { return points[static_cast<std::size_t>(row) * columns + col]; }

  Point2 base(int row, int col) const { return {origin.x + col * spacing, origin.y + row * spacing}; }

  bool operator==(const ControlGrid&) const = default;
};

struct Fiber {
  Point2 p0;
  Point2 p1;

  double length() const { return std::hypot(p1.x - p0.x, p1.y - p0.y); }
  bool operator==(const Fiber&) const = default;
};

struct FuzzballGeometry {
  Point2 center;
  std::vector<Fiber> fibers;

  bool operator==(const FuzzballGeometry&) const = default;
};

struct NuisanceParams {
  double ramp_slope = 0.0;  // depth units per column
  int texture_top_id = 0;
  int texture_bottom_id = 0;
  // Crop offsets as fractions of the free range of each texture, in [0,1).
  Point2 texture_top_offset;
  Point2 texture_bottom_offset;
  std::uint64_t noise_seed = 0;

  bool operator==(const NuisanceParams&) const = default;
};

struct SceneSample {
  GeneratorConfig config;
  ControlGrid grid;
  std::optional<FuzzballGeometry> fuzzball;
  NuisanceParams nuisance;
  std::uint64_t seed = 0;

  bool operator==(const SceneSample&) const = default;
};

/// Number of virtual textures offered by the procedural fallback source.
inline constexpr int kProceduralTexturePool = 232;

inline int grid_columns(const GeneratorConfig& config) {
  return static_cast<int>(std::ceil(config.width_px / config.tow_width_px)) + 1;
}

inline int grid_rows(const GeneratorConfig& config) {
  return static_cast<int>(std::ceil(config.height_px / config.tow_width_px)) + 1;
}

/// Rectilinear lattice with spacing t, centered on the canvas, every point
/// displaced by N(0, (jitter_rel_sigma * t)^2) per axis; optionally one column
/// shifted horizontally by +-|S|, |S| ~ U[low * t, high * t].
inline ControlGrid sample_control_grid(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  const double t = config.tow_width_px;
  ControlGrid grid;
  grid.columns = grid_columns(config);
  grid.rows = grid_rows(config);
  grid.spacing = t;
  // Tow c spans [x_c, x_c + t]; the strip of all tows is centered horizontally
  // and the control rows are centered vertically.
  grid.origin = {(config.width_px - grid.columns * t) / 2.0, (config.height_px - (grid.rows - 1) * t) / 2.0};

  const double sigma = config.jitter_rel_sigma * t;
  grid.points.reserve(static_cast<std::size_t>(grid.rows) * grid.columns);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.columns; ++c) {
      const Point2 b = grid.base(r, c);
      const double dx = rng.normal(0.0, sigma);
      const double dy = rng.normal(0.0, sigma);
      grid.points.push_back({b.x + dx, b.y + dy});
    }
  }

  if (rng.bernoulli(config.shift_probability)) {
    const int column = static_cast<int>(rng.uniform_int(0, grid.columns - 1));
    const double magnitude = rng.uniform(config.shift_rel_range.first * t, config.shift_rel_range.second * t);
    const double shift = rng.bernoulli(0.5) ? magnitude : -magnitude;
    for (int r = 0; r < grid.rows; ++r) grid.points[static_cast<std::size_t>(r) * grid.columns + column].x += shift;
    grid.shifted_column = column;
    grid.shift_px = shift;
  }
  return grid;
}

/// Fuzzball center uniform over the canvas; each fiber starts uniformly in the
/// disk of radius v/2 about the center and runs L ~ U[v, 2v] in a direction
/// uniform on [-pi, pi].
inline FuzzballGeometry sample_fuzzball(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  const double v = config.fuzzball_scale_px;
  FuzzballGeometry geom;
  geom.center = {rng.uniform(0.0, config.width_px), rng.uniform(0.0, config.height_px)};
  const auto count = rng.uniform_int(config.fuzzball_fiber_count_range.first, config.fuzzball_fiber_count_range.second);
  geom.fibers.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const double radius = 0.5 * v * std::sqrt(rng.uniform());
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const Point2 p0{geom.center.x + radius * std::cos(phi), geom.center.y + radius * std::sin(phi)};
    const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double length = rng.uniform(v, 2.0 * v);
    geom.fibers.push_back({p0, {p0.x + length * std::cos(theta), p0.y + length * std::sin(theta)}});
  }
  return geom;
}

/// Ramp slope R ~ N(0, sigma_R^2) with sigma_R chosen so the ramp has standard
/// deviation ramp_edge_sigma at the left/right canvas edge.
inline NuisanceParams sample_nuisance(const GeneratorConfig& config, int texture_count, Rng& rng) {
  config.validate();
  if (texture_count <= 0) throw ConfigError("texture source is empty");
  NuisanceParams p;
  const double sigma_r = config.ramp_edge_sigma / (config.width_px / 2.0);
  p.ramp_slope = sigma_r * rng.normal();
  p.texture_top_id = static_cast<int>(rng.uniform_int(0, texture_count - 1));
  p.texture_bottom_id = static_cast<int>(rng.uniform_int(0, texture_count - 1));
  p.texture_top_offset = {rng.uniform(), rng.uniform()};
  p.texture_bottom_offset = {rng.uniform(), rng.uniform()};
  p.noise_seed = rng();
  return p;
}

/// Joint draw of all latent variables. Each sub-sampler consumes its own
/// stream derived from `seed`, so enabling or disabling one part never
/// perturbs the others.
inline SceneSample sample_scene(const GeneratorConfig& config, std::uint64_t seed,
                                int texture_count = kProceduralTexturePool) {
  config.validate();
  SceneSample scene;
  scene.config = config;
  scene.seed = seed;

  Rng grid_rng(derive_stream(seed, 1));
  scene.grid = sample_control_grid(config, grid_rng);

  Rng fuzz_rng(derive_stream(seed, 2));
  if (fuzz_rng.bernoulli(config.fuzzball_probability)) scene.fuzzball = sample_fuzzball(config, fuzz_rng);

  Rng nuisance_rng(derive_stream(seed, 3));
  scene.nuisance = sample_nuisance(config, texture_count, nuisance_rng);
  return scene;
}

}  // namespace afpseg
