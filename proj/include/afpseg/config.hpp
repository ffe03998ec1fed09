#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <json.hpp>

#include "afpseg/error.hpp"

namespace afpseg {

/// Global parameters of the scene model plus the nuisance amplitudes.
/// Defaults reproduce the 200x300 training geometry with one shifted tow
/// column and one fuzzball per scene.
struct GeneratorConfig {
  int height_px = 200;
  int width_px = 300;
  double tow_width_px = 36.0;
  double jitter_rel_sigma = 0.03;
  std::pair<double, double> shift_rel_range{0.05, 0.5};
  double fuzzball_scale_px = 30.0;
  std::pair<int, int> fuzzball_fiber_count_range{40, 80};
  double shift_probability = 1.0;
  double fuzzball_probability = 1.0;
  double ramp_edge_sigma = 0.3;
  double texture_alpha = 0.25;
  double noise_sigma = 0.02;

  bool operator==(const GeneratorConfig&) const = default;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("generator config: " + msg); };
    if (height_px <= 0 || width_px <= 0) fail("height_px and width_px must be positive");
    if (!(tow_width_px > 0.0) || !std::isfinite(tow_width_px)) fail("tow_width_px must be positive");
    if (height_px < 2.0 * tow_width_px) fail("height_px must be at least 2 * tow_width_px");
    const auto [lo, hi] = shift_rel_range;
    if (!(0.0 < lo && lo < hi && hi <= 0.5)) fail("shift_rel_range must satisfy 0 < low < high <= 0.5");
    if (!(fuzzball_scale_px > 0.0)) fail("fuzzball_scale_px must be positive");
    const auto [cmin, cmax] = fuzzball_fiber_count_range;
    if (cmin < 0 || cmax < cmin) fail("fuzzball_fiber_count_range must be 0 <= low <= high");
    if (!(shift_probability >= 0.0 && shift_probability <= 1.0)) fail("shift_probability must be in [0,1]");
    if (!(fuzzball_probability >= 0.0 && fuzzball_probability <= 1.0))
      fail("fuzzball_probability must be in [0,1]");
    if (!(jitter_rel_sigma >= 0.0) || !(ramp_edge_sigma >= 0.0) || !(noise_sigma >= 0.0))
      fail("sigmas must be non-negative");
    if (!std::isfinite(texture_alpha)) fail("texture_alpha must be finite");
  }
};

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{
      {"height_px", c.height_px},
      {"width_px", c.width_px},
      {"tow_width_px", c.tow_width_px},
      {"jitter_rel_sigma", c.jitter_rel_sigma},
      {"shift_rel_range", {c.shift_rel_range.first, c.shift_rel_range.second}},
      {"fuzzball_scale_px", c.fuzzball_scale_px},
      {"fuzzball_fiber_count_range",
       {c.fuzzball_fiber_count_range.first, c.fuzzball_fiber_count_range.second}},
      {"shift_probability", c.shift_probability},
      {"fuzzball_probability", c.fuzzball_probability},
      {"ramp_edge_sigma", c.ramp_edge_sigma},
      {"texture_alpha", c.texture_alpha},
      {"noise_sigma", c.noise_sigma},
  };
}

namespace detail {

template <class T>
void read_pair(const nlohmann::json& v, const char* key, std::pair<T, T>& out) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(key) + ": expected a 2-element array");
  out = {v[0].get<T>(), v[1].get<T>()};
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  if (!j.is_object()) throw ConfigError("generator config: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "height_px") c.height_px = v.get<int>();
      else if (key == "width_px") c.width_px = v.get<int>();
      else if (key == "tow_width_px") c.tow_width_px = v.get<double>();
      else if (key == "jitter_rel_sigma") c.jitter_rel_sigma = v.get<double>();
      else if (key == "shift_rel_range") detail::read_pair(v, "shift_rel_range", c.shift_rel_range);
      else if (key == "fuzzball_scale_px") c.fuzzball_scale_px = v.get<double>();
      else if (key == "fuzzball_fiber_count_range")
        detail::read_pair(v, "fuzzball_fiber_count_range", c.fuzzball_fiber_count_range);
      else if (key == "shift_probability") c.shift_probability = v.get<double>();
      else if (key == "fuzzball_probability") c.fuzzball_probability = v.get<double>();
      else if (key == "ramp_edge_sigma") c.ramp_edge_sigma = v.get<double>();
      else if (key == "texture_alpha") c.texture_alpha = v.get<double>();
      else if (key == "noise_sigma") c.noise_sigma = v.get<double>();
      else throw ConfigError("generator config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
}

}  // namespace afpseg
