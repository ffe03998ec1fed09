#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "afpseg/raster.hpp"
#include "afpseg/render.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/scene.hpp"

using namespace afpseg;

namespace {

// Winding-number containment of the point (x, y); for simple polygons this
// agrees with the even-odd rule.
bool inside_even_odd(const std::vector<Point2>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    const bool straddles = (a.y > y) != (b.y > y);
    if (straddles && x >= a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x)) in = !in;
  }
  return in;
}

Raster<double> brute_force_dt(const Mask& m) {
  Raster<double> out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int rr = -1; rr <= m.height(); ++rr)
        for (int cc = -1; cc <= m.width(); ++cc)
          if (!m.contains(rr, cc) || !m(rr, cc)) best = std::min(best, std::sqrt(double((rr - r) * (rr - r) + (cc - c) * (cc - c))));
      out(r, c) = best;
    }
  return out;
}

GeneratorConfig clean_config() {
  GeneratorConfig c;
  c.jitter_rel_sigma = 0;
  c.shift_probability = 0;
  c.fuzzball_probability = 0;
  c.ramp_edge_sigma = 0;
  c.texture_alpha = 0;
  c.noise_sigma = 0;
  return c;
}

// Grid with one column shifted by `shift` px and no jitter.
ControlGrid shifted_grid(const GeneratorConfig& c, int column, double shift) {
  Rng rng(0);
  auto g = sample_control_grid(c, rng);
  for (int r = 0; r < g.rows; ++r) g.points[static_cast<std::size_t>(r) * g.columns + column].x += shift;
  g.shifted_column = column;
  g.shift_px = shift;
  return g;
}

}  // namespace

TEST(FillPolygon, AxisAlignedRectangleCoversTwelvePixels) {
  Mask m(10, 10);
  const std::vector<Point2> rect{{0, 0}, {4, 0}, {4, 3}, {0, 3}};
  fill_polygon<std::uint8_t>(rect, m, 1);
  int n = 0;
  for (auto v : m.values()) n += v;
  EXPECT_EQ(n, 12);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(m(r, c), 1);
}

TEST(FillPolygon, CollinearPolygonSetsNothing) {
  Mask m(10, 10);
  const std::vector<Point2> line{{0, 0}, {5, 5}, {9, 9}};
  fill_polygon<std::uint8_t>(line, m, 1);
  for (auto v : m.values()) EXPECT_EQ(v, 0);
}

TEST(FillPolygon, TooFewVerticesIsGeometryError) {
  Mask m(4, 4);
  const std::vector<Point2> two{{0, 0}, {3, 3}};
  EXPECT_THROW(fill_polygon<std::uint8_t>(two, m, 1), GeometryError);
  const std::vector<Point2> bad{{0, 0}, {3, NAN}, {3, 0}};
  EXPECT_THROW(fill_polygon<std::uint8_t>(bad, m, 1), GeometryError);
}

TEST(FillPolygon, ClipsOutOfCanvasArea) {
  DepthMap d(5, 5, 0.0);
  const std::vector<Point2> big{{-10, -10}, {20, -10}, {20, 20}, {-10, 20}};
  fill_polygon(big, d, 2.5);
  for (double v : d.values()) EXPECT_EQ(v, 2.5);
}

TEST(FillPolygon, ConvexPentagonMatchesPointInPolygon) {
  Mask m(20, 20);
  std::vector<Point2> pent;
  for (int k = 0; k < 5; ++k) {
    const double a = 2 * M_PI * k / 5 + 0.3;
    pent.push_back({10 + 8 * std::cos(a), 10 + 8 * std::sin(a)});
  }
  fill_polygon<std::uint8_t>(pent, m, 1);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) EXPECT_EQ(m(r, c) != 0, inside_even_odd(pent, c + 0.5, r + 0.5)) << r << "," << c;
}

TEST(FillPolygon, RandomPolygonsMatchPointInPolygon) {
  Rng rng(17);
  int mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 8));
    std::vector<Point2> poly(n);
    for (auto& p : poly) p = {rng.uniform(-4, 36), rng.uniform(-4, 36)};
    Mask m(32, 32);
    fill_polygon<std::uint8_t>(poly, m, 1);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) mismatches += (m(r, c) != 0) != inside_even_odd(poly, c + 0.5, r + 0.5);
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(DistanceTransform, FullThreeByThree) {
  const Mask m(3, 3, 1);
  const auto d = one_sided_distance_transform(m);
  EXPECT_DOUBLE_EQ(d(1, 1), 2.0);
  EXPECT_DOUBLE_EQ(d(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 0), 1.0);
}

TEST(DistanceTransform, EmptyMaskAllZero) {
  const auto d = one_sided_distance_transform(Mask(5, 7));
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(DistanceTransform, SinglePixel) {
  Mask m(5, 5);
  m(2, 2) = 1;
  const auto d = one_sided_distance_transform(m);
  EXPECT_DOUBLE_EQ(d(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 0), 0.0);
}

TEST(DistanceTransform, RandomMasksMatchBruteForce) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Mask m(16, 16);
    const double p = rng.uniform(0.2, 0.98);
    for (auto& v : m.values()) v = rng.bernoulli(p);
    const auto fast = one_sided_distance_transform(m);
    const auto slow = brute_force_dt(m);
    for (std::size_t i = 0; i < fast.size(); ++i) ASSERT_NEAR(fast.values()[i], slow.values()[i], 1e-12);
  }
}

TEST(DistanceTransform, NonSquareShapes) {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    Mask m(static_cast<int>(rng.uniform_int(1, 12)), static_cast<int>(rng.uniform_int(1, 12)));
    for (auto& v : m.values()) v = rng.bernoulli(0.8);
    const auto fast = one_sided_distance_transform(m);
    const auto slow = brute_force_dt(m);
    for (std::size_t i = 0; i < fast.size(); ++i) ASSERT_NEAR(fast.values()[i], slow.values()[i], 1e-12);
  }
}

TEST(Sigmoid, ReferenceValues) {
  EXPECT_DOUBLE_EQ(sigmoid_profile(3.0, 6.0), 0.5);
  EXPECT_NEAR(sigmoid_profile(0.0, 6.0), 1.0 / (1.0 + std::exp(4.0)), 1e-15);
  EXPECT_NEAR(sigmoid_profile(0.0, 6.0), 0.0180, 5e-5);
  EXPECT_NEAR(sigmoid_profile(6.0, 6.0), 0.9820, 5e-5);
  EXPECT_GE(sigmoid_profile(6.0, 6.0), 0.982);
  EXPECT_THROW(sigmoid_profile(1.0, 0.0), ConfigError);
}

TEST(RasterizeTows, ExactTilingIsAllTow) {
  const auto c = clean_config();
  Rng rng(0);
  const auto g = sample_control_grid(c, rng);
  const auto t = rasterize_tows(g, c);
  for (double v : t.z.values()) EXPECT_EQ(v, 1.0);
  for (auto v : t.y.values()) EXPECT_EQ(v, class_id(PixelClass::tow));
  for (auto v : t.top_mask.values()) EXPECT_EQ(v, 0);
}

TEST(RasterizeTows, ShiftProducesGapAndOverlapBands) {
  const auto c = clean_config();
  const double shift = 0.3 * 36;  // 10.8 px
  const auto g = shifted_grid(c, 4, shift);
  const auto t = rasterize_tows(g, c);
  const int row = 100;
  int gap = 0, overlap = 0;
  for (int col = 0; col < c.width_px; ++col) {
    gap += t.y(row, col) == class_id(PixelClass::gap);
    overlap += t.y(row, col) == class_id(PixelClass::overlap);
  }
  // Bands of width 10.8 px hold 10 or 11 pixel centers.
  EXPECT_GE(gap, 10);
  EXPECT_LE(gap, 11);
  EXPECT_GE(overlap, 10);
  EXPECT_LE(overlap, 11);
  // Gap lies left of the shifted tow, overlap under its right edge.
  const double left = g.at(0, 4).x;
  for (int col = 0; col < c.width_px; ++col) {
    if (t.y(row, col) == class_id(PixelClass::gap)) {
      EXPECT_LT(col + 0.5, left);
      EXPECT_EQ(t.z(row, col), 0.0);
    }
    if (t.y(row, col) == class_id(PixelClass::overlap)) {
      EXPECT_GT(col + 0.5, left + 36 - shift);
      EXPECT_LT(col + 0.5, left + 36);
    }
  }
}

TEST(RasterizeTows, OverlapDepthProfile) {
  const auto c = clean_config();
  const auto g = shifted_grid(c, 4, 0.4 * 36);
  const auto t = rasterize_tows(g, c);
  const double s0 = sigmoid_profile(0.0, kDefaultTransitionPx);
  const int row = 100;
  double max_z = 0.0;
  int first = -1, last = -1;
  for (int col = 0; col < c.width_px; ++col) {
    if (t.y(row, col) != class_id(PixelClass::overlap)) continue;
    if (first < 0) first = col;
    last = col;
    max_z = std::max(max_z, t.z(row, col));
    EXPECT_GE(t.z(row, col), 1.0 + s0 - 1e-12);
    EXPECT_LE(t.z(row, col), 2.0);
  }
  ASSERT_GE(first, 0);
  EXPECT_GT(max_z, 1.98);
  // The buried (shifted) tow's edge is the right end of the band: smooth,
  // starting near 1 + sigma(d) with d one pixel; the top tow's edge on the
  // left is a sharp step to the saturated value.
  EXPECT_NEAR(t.z(row, last), 1.0 + sigmoid_profile(1.0, kDefaultTransitionPx), 1e-9);
  EXPECT_GT(t.z(row, first), 1.98);
  EXPECT_EQ(t.z(row, last + 1), 1.0);
  // Monotone decrease toward the buried edge
  for (int col = first + 1; col <= last; ++col) EXPECT_LE(t.z(row, col), t.z(row, col - 1) + 1e-12);
}

TEST(RasterizeTows, TopMaskIsTheLaterTow) {
  const auto c = clean_config();
  const auto g = shifted_grid(c, 4, 0.3 * 36);
  const auto t = rasterize_tows(g, c);
  Mask tow5(c.height_px, c.width_px);
  fill_polygon<std::uint8_t>(tow_polygon(g, 5, c.height_px), tow5, 1);
  EXPECT_EQ(t.top_mask, tow5);
}

TEST(RasterizeTows, DrawOrderPutsShiftedColumnFirst) {
  ControlGrid g;
  g.columns = 4;
  g.shifted_column = 2;
  EXPECT_EQ(tow_draw_order(g), (std::vector<int>{2, 0, 1, 3}));
  g.shifted_column.reset();
  EXPECT_EQ(tow_draw_order(g), (std::vector<int>{0, 1, 2, 3}));
}

TEST(RasterizeTows, LabelDepthConsistencyOverRandomScenes) {
  GeneratorConfig c = clean_config();
  c.jitter_rel_sigma = 0.03;
  c.shift_probability = 1;
  c.fuzzball_probability = 1;
  const double s0 = sigmoid_profile(0.0, kDefaultTransitionPx);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto scene = sample_scene(c, seed);
    auto t = rasterize_tows(scene.grid, c);
    const DepthMap before = t.z;
    render_fuzzball(*scene.fuzzball, t.z, t.y);
    for (std::size_t i = 0; i < t.z.size(); ++i) {
      const auto y = t.y.values()[i];
      const double z = t.z.values()[i];
      if (y == class_id(PixelClass::gap)) ASSERT_EQ(z, 0.0);
      if (y == class_id(PixelClass::tow)) ASSERT_EQ(z, 1.0);
      if (y == class_id(PixelClass::overlap)) ASSERT_GE(z, 1.0 + s0 - 1e-12);
      if (y == class_id(PixelClass::fuzzball)) ASSERT_GE(z, before.values()[i] + 0.15 - 1e-12);
    }
  }
}

TEST(Bresenham, HorizontalLineOfLengthForty) {
  std::vector<std::pair<int, int>> px;
  bresenham({10.2, 20.7}, {50.2, 20.7}, [&](int r, int c) { px.emplace_back(r, c); });
  ASSERT_EQ(px.size(), 41u);
  for (int i = 0; i < 41; ++i) EXPECT_EQ(px[i], std::make_pair(20, 10 + i));
}

TEST(Bresenham, EightConnectedAndEndpointsIncluded) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 a{rng.uniform(-20, 20), rng.uniform(-20, 20)};
    const Point2 b{rng.uniform(-20, 20), rng.uniform(-20, 20)};
    std::vector<std::pair<int, int>> px;
    bresenham(a, b, [&](int r, int c) { px.emplace_back(r, c); });
    EXPECT_EQ(px.front(), std::make_pair(int(std::floor(a.y)), int(std::floor(a.x))));
    EXPECT_EQ(px.back(), std::make_pair(int(std::floor(b.y)), int(std::floor(b.x))));
    const int expected = std::max(std::abs(int(std::floor(b.x)) - int(std::floor(a.x))),
                                  std::abs(int(std::floor(b.y)) - int(std::floor(a.y)))) + 1;
    EXPECT_EQ(static_cast<int>(px.size()), expected);
    for (std::size_t i = 1; i < px.size(); ++i) {
      EXPECT_LE(std::abs(px[i].first - px[i - 1].first), 1);
      EXPECT_LE(std::abs(px[i].second - px[i - 1].second), 1);
    }
  }
}

TEST(RenderFuzzball, NoFibersLeavesMapsUnchanged) {
  DepthMap z(10, 10, 1.0);
  LabelMap y(10, 10, 1);
  render_fuzzball(FuzzballGeometry{{5, 5}, {}}, z, y);
  for (double v : z.values()) EXPECT_EQ(v, 1.0);
  for (auto v : y.values()) EXPECT_EQ(v, 1);
}

TEST(RenderFuzzball, HorizontalFiberRaisesFortyOnePixels) {
  DepthMap z(60, 60, 1.0);
  LabelMap y(60, 60, 1);
  render_fuzzball(FuzzballGeometry{{30, 30}, {{{5.5, 30.5}, {45.5, 30.5}}}}, z, y);
  int raised = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.values()[i] != 1.0) {
      ++raised;
      EXPECT_DOUBLE_EQ(z.values()[i], 1.15);
      EXPECT_EQ(y.values()[i], class_id(PixelClass::fuzzball));
    }
  }
  EXPECT_EQ(raised, 41);
}

TEST(RenderFuzzball, IdenticalFibersAccumulate) {
  DepthMap z(20, 20, 0.0);
  LabelMap y(20, 20, 0);
  const Fiber f{{2.5, 2.5}, {15.5, 9.5}};
  render_fuzzball(FuzzballGeometry{{5, 5}, {f, f}}, z, y);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z.values()[i] != 0.0) EXPECT_NEAR(z.values()[i], 0.30, 1e-15);
}

TEST(RenderFuzzball, ClipsAtCanvas) {
  DepthMap z(10, 10, 0.0);
  LabelMap y(10, 10, 0);
  EXPECT_NO_THROW(render_fuzzball(FuzzballGeometry{{5, 5}, {{{-30, 5.5}, {40, 5.5}}}}, z, y));
  int raised = 0;
  for (double v : z.values()) raised += v > 0;
  EXPECT_EQ(raised, 10);
}
