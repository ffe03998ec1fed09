#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "afpseg/config.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/scene.hpp"

using namespace afpseg;

namespace {

GeneratorConfig default_geometry() { return GeneratorConfig{}; }

// Two-sided KS statistic of `xs` against U[lo, hi].
double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
}

TEST(Rng, KnownFirstOutputs) {
  // splitmix64 reference values for state 0 (Vigna's test vectors)
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(splitmix64(0x9E3779B97F4A7C15ull), 0x6E789E6AA1B965F4ull);
}

TEST(Rng, UniformIntCoversInclusiveRange) {
  Rng rng(1);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.uniform_int(-2, 3);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 3);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_stream(5, 1), derive_stream(5, 2));
  EXPECT_NE(derive_stream(5, 1), derive_stream(6, 1));
  EXPECT_EQ(derive_stream(5, 1), derive_stream(5, 1));
}

TEST(GeneratorConfig, DefaultsValidate) { EXPECT_NO_THROW(default_geometry().validate()); }

TEST(GeneratorConfig, RejectsBrokenInvariants) {
  auto c = default_geometry();
  c.height_px = 60;  // < 2t
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_geometry();
  c.shift_rel_range = {0.3, 0.2};
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_geometry();
  c.shift_rel_range = {0.1, 0.6};
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_geometry();
  c.noise_sigma = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_geometry();
  c.shift_probability = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GeneratorConfig, JsonRoundTripAndUnknownKeys) {
  auto c = default_geometry();
  c.tow_width_px = 12;
  c.fuzzball_fiber_count_range = {3, 9};
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<GeneratorConfig>(), c);
  EXPECT_TRUE(j.contains("shift_rel_range"));
  EXPECT_TRUE(j.contains("fuzzball_fiber_count_range"));

  auto partial = nlohmann::json::parse(R"({"width_px": 96})");
  const auto p = partial.get<GeneratorConfig>();
  EXPECT_EQ(p.width_px, 96);
  EXPECT_EQ(p.height_px, 200);

  EXPECT_THROW(nlohmann::json::parse(R"({"widht_px": 96})").get<GeneratorConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"width_px": "wide"})").get<GeneratorConfig>(), ConfigError);
}

TEST(ControlGrid, DimensionsAtDefaultGeometry) {
  Rng rng(0);
  const auto g = sample_control_grid(default_geometry(), rng);
  EXPECT_EQ(g.columns, 10);
  EXPECT_EQ(g.rows, 7);
  EXPECT_EQ(g.points.size(), 70u);
  EXPECT_DOUBLE_EQ(g.spacing, 36.0);
}

TEST(ControlGrid, BaseLatticeHasTowSpacing) {
  auto c = default_geometry();
  c.jitter_rel_sigma = 0;
  c.shift_probability = 0;
  Rng rng(1);
  const auto g = sample_control_grid(c, rng);
  for (int r = 0; r < g.rows; ++r)
    for (int col = 0; col < g.columns; ++col) {
      EXPECT_EQ(g.at(r, col), g.base(r, col));
      if (col > 0) {
        EXPECT_DOUBLE_EQ(g.at(r, col).x - g.at(r, col - 1).x, 36.0);
      }
      if (r > 0) {
        EXPECT_DOUBLE_EQ(g.at(r, col).y - g.at(r - 1, col).y, 36.0);
      }
    }
  // lattice spans the canvas: leftmost tow starts left of 0, rightmost ends past the width
  EXPECT_LE(g.at(0, 0).x, 0.0);
  EXPECT_GE(g.at(0, g.columns - 1).x + 36.0, 300.0);
}

TEST(ControlGrid, JitterSigmaIsThreePercentOfTowWidth) {
  auto c = default_geometry();
  c.tow_width_px = 100;
  c.height_px = 400;
  c.width_px = 600;
  c.shift_probability = 0;
  double s2 = 0;
  long n = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const auto g = sample_control_grid(c, rng);
    for (int r = 0; r < g.rows; ++r)
      for (int col = 0; col < g.columns; ++col) {
        const auto d = g.at(r, col);
        const auto b = g.base(r, col);
        s2 += (d.x - b.x) * (d.x - b.x) + (d.y - b.y) * (d.y - b.y);
        n += 2;
      }
  }
  EXPECT_NEAR(std::sqrt(s2 / n), 3.0, 0.06);
}

TEST(ControlGrid, UnshiftedPointsStayWithinSixSigma) {
  const auto c = default_geometry();
  const double bound = 6 * 0.03 * 36;
  long outside = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 1700; ++seed) {
    Rng rng(seed);
    const auto g = sample_control_grid(c, rng);
    for (int r = 0; r < g.rows; ++r)
      for (int col = 0; col < g.columns; ++col) {
        if (g.shifted_column && *g.shifted_column == col) continue;
        const auto d = g.at(r, col);
        const auto b = g.base(r, col);
        outside += std::abs(d.x - b.x) > bound || std::abs(d.y - b.y) > bound;
        ++total;
      }
  }
  ASSERT_GE(total, 100000);
  EXPECT_LE(static_cast<double>(outside) / total, 1e-4);
}

TEST(ControlGrid, ShiftMagnitudeIsUniformOnRange) {
  const auto c = default_geometry();
  std::vector<double> mags;
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    const auto g = sample_control_grid(c, rng);
    ASSERT_TRUE(g.shifted_column.has_value());
    ASSERT_TRUE(g.shift_px.has_value());
    const double s = *g.shift_px;
    ASSERT_GE(std::abs(s), 1.8);
    ASSERT_LE(std::abs(s), 18.0);
    mags.push_back(std::abs(s));
    positive += s > 0;
  }
  // Critical value of the two-sided KS test at alpha = 0.01: 1.628 / sqrt(n).
  EXPECT_LT(ks_uniform(mags, 1.8, 18.0), 1.628 / std::sqrt(10000.0));
  EXPECT_NEAR(positive / 10000.0, 0.5, 0.02);
}

TEST(ControlGrid, ShiftedColumnMovesByShift) {
  auto c = default_geometry();
  c.jitter_rel_sigma = 0;
  Rng rng(11);
  const auto g = sample_control_grid(c, rng);
  ASSERT_TRUE(g.shifted_column);
  for (int r = 0; r < g.rows; ++r)
    for (int col = 0; col < g.columns; ++col) {
      const double expect = col == *g.shifted_column ? *g.shift_px : 0.0;
      EXPECT_DOUBLE_EQ(g.at(r, col).x - g.base(r, col).x, expect);
      EXPECT_DOUBLE_EQ(g.at(r, col).y, g.base(r, col).y);
    }
}

TEST(Fuzzball, FiberLengthsAndCenter) {
  const auto c = default_geometry();
  double lo = 1e9, hi = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed);
    const auto f = sample_fuzzball(c, rng);
    EXPECT_GE(f.center.x, 0.0);
    EXPECT_LT(f.center.x, 300.0);
    EXPECT_GE(f.center.y, 0.0);
    EXPECT_LT(f.center.y, 200.0);
    EXPECT_GE(f.fibers.size(), 40u);
    EXPECT_LE(f.fibers.size(), 80u);
    for (const auto& fib : f.fibers) {
      const double len = std::hypot(fib.p1.x - fib.p0.x, fib.p1.y - fib.p0.y);
      lo = std::min(lo, len);
      hi = std::max(hi, len);
      EXPECT_LE(std::hypot(fib.p0.x - f.center.x, fib.p0.y - f.center.y), 15.0 + 1e-9);
    }
  }
  EXPECT_GE(lo, 30.0 - 1e-9);
  EXPECT_LE(hi, 60.0 + 1e-9);
}

TEST(Fuzzball, FiberCountMeanMatchesDiscreteUniform) {
  const auto c = default_geometry();
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    sum += static_cast<double>(sample_fuzzball(c, rng).fibers.size());
  }
  const double mean = sum / 10000;
  EXPECT_GE(mean, 58.0);
  EXPECT_LE(mean, 62.0);
}

TEST(Nuisance, ZeroRampSigmaGivesZeroSlope) {
  auto c = default_geometry();
  c.ramp_edge_sigma = 0;
  Rng rng(4);
  EXPECT_EQ(sample_nuisance(c, 232, rng).ramp_slope, 0.0);
}

TEST(Nuisance, RampSlopeSigma) {
  const auto c = default_geometry();
  double s2 = 0;
  const int n = 40000;
  Rng rng(5);
  for (int i = 0; i < n; ++i) {
    const double r = sample_nuisance(c, 232, rng).ramp_slope;
    s2 += r * r;
  }
  EXPECT_NEAR(std::sqrt(s2 / n), 0.3 / 150.0, 0.002 * 0.02);
}

TEST(Nuisance, SingleTextureSourceRepeatsId) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto p = sample_nuisance(default_geometry(), 1, rng);
    EXPECT_EQ(p.texture_top_id, 0);
    EXPECT_EQ(p.texture_bottom_id, 0);
  }
}

TEST(Nuisance, EmptyTextureSourceIsConfigError) {
  Rng rng(6);
  EXPECT_THROW(sample_nuisance(default_geometry(), 0, rng), ConfigError);
}

TEST(Scene, Deterministic) {
  const auto c = default_geometry();
  EXPECT_EQ(sample_scene(c, 42), sample_scene(c, 42));
  EXPECT_FALSE(sample_scene(c, 42) == sample_scene(c, 43));
}

TEST(Scene, DefectFreeWhenProbabilitiesZero) {
  auto c = default_geometry();
  c.shift_probability = 0;
  c.fuzzball_probability = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto scene = sample_scene(c, s);
    EXPECT_FALSE(scene.grid.shifted_column);
    EXPECT_FALSE(scene.grid.shift_px);
    EXPECT_FALSE(scene.fuzzball);
  }
}

TEST(Scene, DefaultsHaveOneShiftAndOneFuzzball) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto scene = sample_scene(default_geometry(), s);
    EXPECT_TRUE(scene.grid.shifted_column);
    EXPECT_TRUE(scene.fuzzball);
  }
}

TEST(Scene, InvalidConfigThrows) {
  auto c = default_geometry();
  c.tow_width_px = -1;
  EXPECT_THROW(sample_scene(c, 1), ConfigError);
}
