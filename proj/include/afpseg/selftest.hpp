#pragma once

// Built-in consistency checks run by `afpseg selftest`: finite-difference
// gradients and brute-force references for the rasterizer and conv kernel.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "afpseg/kernels.hpp"
#include "afpseg/network.hpp"
#include "afpseg/raster.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/training.hpp"

namespace afpseg {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

namespace reference {

/// Even-odd test of the pixel center against every edge.
inline bool covers_center(std::span<const Point2> poly, int row, int col) {
  const double x = col + 0.5, y = row + 0.5;
  int crossings = 0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > y) == (b.y > y)) continue;
    if (a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y) <= x) ++crossings;
  }
  return crossings % 2 == 1;
}

/// O(n^2) distance to the nearest unmasked pixel, the one-pixel ring around
/// the canvas included.
inline Raster<double> distance_transform(const Mask& mask) {
  Raster<double> out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int rr = -1; rr <= mask.height(); ++rr)
        for (int cc = -1; cc <= mask.width(); ++cc) {
          const bool outside = !mask.contains(rr, cc) || !mask(rr, cc);
          if (outside) best = std::min(best, std::hypot(rr - r, cc - c));
        }
      out(r, c) = best;
    }
  return out;
}

template <class T>
nn::Tensor<T> conv2d(const nn::Tensor<T>& in, const nn::Tensor<T>& k, const nn::Tensor<T>& bias, int pad) {
  const int n = in.extent(0), h = in.extent(1), w = in.extent(2), ci = in.extent(3);
  const int kh = k.extent(0), kw = k.extent(1), co = k.extent(3);
  const int oh = h + 2 * pad - kh + 1, ow = w + 2 * pad - kw + 1;
  nn::Tensor<T> out({n, oh, ow, co});
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int o = 0; o < co; ++o) {
          double s = bias[o];
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
              const int iy = y + dy - pad, ix = x + dx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int c = 0; c < ci; ++c)
                s += static_cast<double>(in.at(b, iy, ix, c)) * k[((dy * kw + dx) * ci + c) * co + o];
            }
          out.at(b, y, x, o) = static_cast<T>(s);
        }
  return out;
}

template <class T>
nn::Tensor<T> maxpool2(const nn::Tensor<T>& in) {
  nn::Tensor<T> out({in.extent(0), in.extent(1) / 2, in.extent(2) / 2, in.extent(3)});
  for (int b = 0; b < out.extent(0); ++b)
    for (int y = 0; y < out.extent(1); ++y)
      for (int x = 0; x < out.extent(2); ++x)
        for (int c = 0; c < out.extent(3); ++c)
          out.at(b, y, x, c) = std::max({in.at(b, 2 * y, 2 * x, c), in.at(b, 2 * y, 2 * x + 1, c),
                                         in.at(b, 2 * y + 1, 2 * x, c), in.at(b, 2 * y + 1, 2 * x + 1, c)});
  return out;
}

template <class T>
nn::Tensor<T> upsample2(const nn::Tensor<T>& in) {
  nn::Tensor<T> out({in.extent(0), in.extent(1) * 2, in.extent(2) * 2, in.extent(3)});
  for (int b = 0; b < out.extent(0); ++b)
    for (int y = 0; y < out.extent(1); ++y)
      for (int x = 0; x < out.extent(2); ++x)
        for (int c = 0; c < out.extent(3); ++c) out.at(b, y, x, c) = in.at(b, y / 2, x / 2, c);
  return out;
}

}  // namespace reference

inline std::vector<Point2> random_polygon(Rng& rng, int height, int width) {
  const int n = static_cast<int>(rng.uniform_int(3, 8));
  std::vector<Point2> poly(n);
  for (auto& p : poly) p = {rng.uniform(-3.0, width + 3.0), rng.uniform(-3.0, height + 3.0)};
  return poly;
}

inline CheckResult check_gradients(std::uint64_t seed) {
  nn::NetworkConfig cfg;
  cfg.levels = 2;
  cfg.base_features = 2;
  nn::Network<double> net(cfg);
  net.init(seed);
  Rng rng(derive_stream(seed, 1));
  nn::Tensor<double> x({1, 8, 8, 1});
  for (auto& v : x.values()) v = rng.normal();
  std::vector<std::uint8_t> labels(64);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, kClassCount - 1));
  const auto r = nn::gradient_check_report(net, x, labels);
  return {"gradient check (levels 2, 8x8, float64)", r.max_relative < 1e-6,
          "max relative error " + sci(r.max_relative) + ", max abs difference " + sci(r.max_absolute)};
}

inline CheckResult check_fill_polygon(std::uint64_t seed, int instances = 100) {
  Rng rng(derive_stream(seed, 2));
  int mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    const int h = static_cast<int>(rng.uniform_int(1, 24)), w = static_cast<int>(rng.uniform_int(1, 24));
    const auto poly = random_polygon(rng, h, w);
    Mask m(h, w);
    fill_polygon<std::uint8_t>(poly, m, 1);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) mismatches += (m(r, c) != 0) != reference::covers_center(poly, r, c);
  }
  return {"fill_polygon vs point-in-polygon", mismatches == 0, std::to_string(mismatches) + " mismatched pixels"};
}

inline CheckResult check_distance_transform(std::uint64_t seed, int instances = 100) {
  Rng rng(derive_stream(seed, 3));
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int h = static_cast<int>(rng.uniform_int(1, 16)), w = static_cast<int>(rng.uniform_int(1, 16));
    const double density = rng.uniform(0.3, 1.0);
    Mask m(h, w);
    for (auto& v : m.values()) v = rng.bernoulli(density);
    const auto fast = one_sided_distance_transform(m);
    const auto slow = reference::distance_transform(m);
    for (std::size_t k = 0; k < fast.size(); ++k)
      worst = std::max(worst, std::abs(fast.values()[k] - slow.values()[k]));
  }
  return {"distance transform vs brute force", worst == 0.0, "max abs difference " + sci(worst)};
}

inline CheckResult check_conv2d(std::uint64_t seed, int instances = 100) {
  Rng rng(derive_stream(seed, 4));
  double worst = 0.0;
  for (int i = 0; i < instances;) {
    const int h = static_cast<int>(rng.uniform_int(1, 9)), w = static_cast<int>(rng.uniform_int(1, 9));
    const int ci = static_cast<int>(rng.uniform_int(1, 5)), co = static_cast<int>(rng.uniform_int(1, 9));
    const int k = 2 * static_cast<int>(rng.uniform_int(0, 2)) + 1;
    const int pad = static_cast<int>(rng.uniform_int(0, k / 2));
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    ++i;
    nn::Tensor<double> x({1, h, w, ci}), kern({k, k, ci, co}), bias({co});
    for (auto& v : x.values()) v = rng.normal();
    for (auto& v : kern.values()) v = rng.normal();
    for (auto& v : bias.values()) v = rng.normal();
    const auto fast = nn::conv2d(x, kern, bias, pad);
    const auto slow = reference::conv2d(x, kern, bias, pad);
    for (std::size_t j = 0; j < fast.size(); ++j)
      worst = std::max(worst, std::abs(fast[j] - slow[j]) / std::max(1.0, std::abs(slow[j])));
  }
  return {"conv2d vs naive loops", worst < 1e-9, "max relative difference " + sci(worst)};
}

/// Float kernels against the reference; ties in pooling are frequent on purpose.
inline CheckResult check_maxpool2(std::uint64_t seed, int instances = 100) {
  Rng rng(derive_stream(seed, 5));
  std::size_t mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    const int h = 2 * static_cast<int>(rng.uniform_int(1, 6)), w = 2 * static_cast<int>(rng.uniform_int(1, 6));
    nn::Tensor<float> x({static_cast<int>(rng.uniform_int(1, 2)), h, w, static_cast<int>(rng.uniform_int(1, 4))});
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform_int(-3, 3)) * 0.5f;
    const auto fast = nn::maxpool2(x).output;
    const auto slow = reference::maxpool2(x);
    for (std::size_t j = 0; j < fast.size(); ++j) mismatches += fast[j] != slow[j];
  }
  return {"maxpool2 vs window maximum", mismatches == 0, std::to_string(mismatches) + " mismatched outputs"};
}

inline CheckResult check_upsample2(std::uint64_t seed, int instances = 100) {
  Rng rng(derive_stream(seed, 6));
  std::size_t mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    nn::Tensor<float> x({1, static_cast<int>(rng.uniform_int(1, 7)), static_cast<int>(rng.uniform_int(1, 7)),
                         static_cast<int>(rng.uniform_int(1, 4))});
    for (auto& v : x.values()) v = static_cast<float>(rng.normal());
    const auto fast = nn::upsample2(x);
    const auto slow = reference::upsample2(x);
    for (std::size_t j = 0; j < fast.size(); ++j) mismatches += fast[j] != slow[j];
  }
  return {"upsample2 vs index arithmetic", mismatches == 0, std::to_string(mismatches) + " mismatched outputs"};
}

inline std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  return {check_gradients(seed),     check_fill_polygon(seed), check_distance_transform(seed),
          check_conv2d(seed),        check_maxpool2(seed),     check_upsample2(seed)};
}

}  // namespace afpseg
