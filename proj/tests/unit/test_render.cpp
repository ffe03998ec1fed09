#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "afpseg/png_io.hpp"
#include "afpseg/render.hpp"
#include "afpseg/scene.hpp"
#include "afpseg/texture.hpp"

using namespace afpseg;
namespace fs = std::filesystem;

namespace {

GeneratorConfig nuisance_off(GeneratorConfig c = {}) {
  c.ramp_edge_sigma = 0;
  c.texture_alpha = 0;
  c.noise_sigma = 0;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("afpseg_render_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Nuisance, IdentityWhenEverythingOff) {
  const auto c = nuisance_off();
  const auto scene = sample_scene(c, 9);
  const auto ex = render_scene(scene, TextureSource::procedural());
  ASSERT_TRUE(ex.z);
  EXPECT_EQ(ex.x, *ex.z);
}

TEST(Nuisance, RampArithmetic) {
  const auto c = nuisance_off();
  DepthMap z(4, 300, 0.0);
  NuisanceParams p;
  p.ramp_slope = 0.002;
  const auto x = apply_nuisance(z, Mask(4, 300), p, TextureSource::procedural(), c);
  EXPECT_NEAR(x(0, 0), -0.3, 1e-12);
  EXPECT_NEAR(x(3, 299), 0.298, 1e-12);
  for (int col = 1; col < 300; ++col) EXPECT_NEAR(x(2, col) - x(2, col - 1), 0.002, 1e-12);
}

TEST(Nuisance, ConstantHalfTextureContributesNothing) {
  auto c = nuisance_off();
  c.texture_alpha = 0.7;
  const auto tex = TextureSource::from_images({Raster<double>(50, 60, 0.5)});
  DepthMap z(40, 50, 1.0);
  Mask top(40, 50);
  top(3, 3) = 1;
  const auto x = apply_nuisance(z, top, NuisanceParams{}, tex, c);
  EXPECT_EQ(x, z);
}

TEST(Nuisance, TopAndBottomTexturesFollowMask) {
  auto c = nuisance_off();
  c.texture_alpha = 0.5;
  const auto tex = TextureSource::from_images({Raster<double>(8, 8, 1.0), Raster<double>(8, 8, 0.0)});
  DepthMap z(8, 8, 0.0);
  Mask top(8, 8);
  top(1, 1) = 1;
  NuisanceParams p;
  p.texture_top_id = 0;
  p.texture_bottom_id = 1;
  const auto x = apply_nuisance(z, top, p, tex, c);
  EXPECT_DOUBLE_EQ(x(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(x(0, 0), -0.25);
}

TEST(Nuisance, DoesNotMutateZAndNoiseHasSigma) {
  auto c = nuisance_off();
  c.noise_sigma = 0.02;
  const DepthMap z(100, 100, 1.0);
  const DepthMap copy = z;
  NuisanceParams p;
  p.noise_seed = 77;
  const auto x = apply_nuisance(z, Mask(100, 100), p, TextureSource::procedural(), c);
  EXPECT_EQ(z, copy);
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.values()[i] - 1.0;
    s += d;
    s2 += d * d;
  }
  EXPECT_NEAR(s / 1e4, 0.0, 0.001);
  EXPECT_NEAR(std::sqrt(s2 / 1e4), 0.02, 0.001);
}

TEST(Nuisance, SmallTextureIsConfigError) {
  auto c = nuisance_off();
  c.texture_alpha = 0.25;
  const auto tex = TextureSource::from_images({Raster<double>(5, 5, 0.3)});
  EXPECT_THROW(apply_nuisance(DepthMap(10, 10), Mask(10, 10), NuisanceParams{}, tex, c), ConfigError);
}

TEST(Nuisance, MaskExtentMismatchIsShapeError) {
  EXPECT_THROW(apply_nuisance(DepthMap(10, 10), Mask(9, 10), NuisanceParams{}, TextureSource::procedural(),
                              nuisance_off()),
               ShapeError);
}

TEST(Texture, ProceduralRangeOverRandomDescriptors) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    ValueNoiseDescriptor d;
    d.octaves = static_cast<int>(rng.uniform_int(1, 7));
    d.base_frequency = rng.uniform(0.001, 0.5);
    d.seed = rng();
    const auto t = procedural_texture(24, 16, d);
    for (double v : t.values()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Texture, ProceduralDeterministic) {
  ValueNoiseDescriptor d;
  d.seed = 5;
  EXPECT_EQ(procedural_texture(30, 20, d), procedural_texture(30, 20, d));
  d.seed = 6;
  EXPECT_FALSE(procedural_texture(30, 20, d) == procedural_texture(30, 20, ValueNoiseDescriptor{}));
}

TEST(Texture, LowFrequencyIsNearConstant) {
  ValueNoiseDescriptor d;
  d.octaves = 1;
  d.base_frequency = 1e-6;
  const auto t = procedural_texture(50, 50, d);
  const auto [mn, mx] = std::minmax_element(t.values().begin(), t.values().end());
  EXPECT_LT(*mx - *mn, 1e-4);
}

TEST(Texture, ZeroOctavesRejected) {
  ValueNoiseDescriptor d;
  d.octaves = 0;
  EXPECT_THROW(procedural_texture(4, 4, d), ConfigError);
}

TEST(Texture, DirectoryOfPngs) {
  const auto dir = scratch_dir("textures");
  Raster<double> img(40, 50);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 50; ++c) img(r, c) = (r * 50 + c) % 256 / 255.0;
  png::write_depth((dir / "b.png").string(), img);
  png::write_depth((dir / "a.png").string(), Raster<double>(40, 50, 0.0));
  const auto src = TextureSource::directory(dir.string());
  EXPECT_EQ(src.count(), 2);
  EXPECT_FALSE(src.is_procedural());
  const auto crop = src.crop(1, {0.0, 0.0}, 10, 10);
  EXPECT_NEAR(crop(0, 1), 1 / 255.0, 1e-12);
  EXPECT_THROW(src.crop(0, {0, 0}, 41, 10), ConfigError);
  EXPECT_THROW(TextureSource::directory((dir / "missing").string()), FileError);
}

TEST(RenderScene, DefectFreeCleanScene) {
  auto c = nuisance_off();
  c.jitter_rel_sigma = 0;
  c.shift_probability = 0;
  c.fuzzball_probability = 0;
  const auto ex = render_scene(sample_scene(c, 3), TextureSource::procedural());
  for (double v : ex.x.values()) EXPECT_EQ(v, 1.0);
  for (auto v : ex.y.values()) EXPECT_EQ(v, class_id(PixelClass::tow));
}

TEST(RenderScene, DeterministicAndLabelsIndependentOfNuisance) {
  const GeneratorConfig c;
  const auto tex = TextureSource::procedural();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = sample_scene(c, seed);
    const auto a = render_scene(scene, tex);
    const auto b = render_scene(scene, tex);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
    auto tows = rasterize_tows(scene.grid, c);
    render_fuzzball(*scene.fuzzball, tows.z, tows.y);
    EXPECT_EQ(a.y, tows.y);
  }
}

TEST(RenderScene, DefaultScenesContainEveryClass) {
  const GeneratorConfig c;
  const auto tex = TextureSource::procedural();
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ex = render_scene(sample_scene(c, seed), tex);
    for (auto v : ex.y.values()) seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Png, LabelRoundTripUsesPalette) {
  const auto dir = scratch_dir("png");
  const auto ex = render_scene(sample_scene(GeneratorConfig{}, 4), TextureSource::procedural());
  const auto path = (dir / "labels.png").string();
  png::write_labels(path, ex.y);
  EXPECT_EQ(png::read_labels(path), ex.y);
}

TEST(Png, DepthIsMinMaxScaled) {
  const auto dir = scratch_dir("depth");
  DepthMap d(2, 3);
  d(0, 0) = -1;
  d(1, 2) = 3;
  d(0, 1) = 1;
  const auto path = (dir / "d.png").string();
  png::write_depth(path, d);
  const auto g = png::read_gray(path);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g(1, 2), 1.0);
  EXPECT_NEAR(g(0, 1), 128 / 255.0, 1e-12);
}

TEST(Png, MissingFileIsFileError) {
  EXPECT_THROW(png::read_gray("/nonexistent/x.png"), FileError);
}
