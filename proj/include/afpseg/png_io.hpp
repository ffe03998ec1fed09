#pragma once

// Thin libpng wrappers: 8-bit gray / RGB writers and a reader that returns
// any PNG as gray levels in [0,1] or as packed 8-bit RGB.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "afpseg/error.hpp"
#include "afpseg/raster.hpp"

namespace afpseg::png {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void write(const std::string& path, int height, int width, int color_type, int channels,
                  const std::uint8_t* pixels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw FileError(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FileError(path, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FileError(path, "PNG encoding failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(r) * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw FileError(path, "write failed");
}

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 (gray) or 3 (rgb)
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint8_t> bytes;
};

// Expands palette/low-bit gray, drops alpha; keeps 16-bit samples.
inline Decoded read(const std::string& path, bool want_rgb) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw FileError(path, "cannot open for reading");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), fp.get()) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()))
    throw FileError(path, "not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FileError(path, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FileError(path, "PNG decoding failed");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool is_color = (color & PNG_COLOR_MASK_COLOR) != 0;
  if (want_rgb) {
    png_set_strip_16(png);
    if (!is_color) png_set_gray_to_rgb(png);
  } else if (is_color) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);  // little-endian u16 samples
  png_read_update_info(png, info);

  Decoded d;
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  d.bytes.resize(rowbytes * d.height);
  std::vector<png_bytep> rows(d.height);
  for (int r = 0; r < d.height; ++r) rows[r] = d.bytes.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

}  // namespace detail

/// 8-bit grayscale, affine min-max scaled per image (constant maps write 0).
template <class T>
void write_depth(const std::string& path, const Raster<T>& depth) {
  double lo = 0.0, hi = 0.0;
  if (depth.size() > 0) {
    const auto [mn, mx] = std::minmax_element(depth.values().begin(), depth.values().end());
    lo = static_cast<double>(*mn);
    hi = static_cast<double>(*mx);
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<std::uint8_t> px(depth.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::lround((static_cast<double>(depth.values()[i]) - lo) * scale));
  detail::write(path, depth.height(), depth.width(), PNG_COLOR_TYPE_GRAY, 1, px.data());
}

inline constexpr std::array<std::array<std::uint8_t, 3>, kClassCount> kPalette{{
    {255, 0, 0},    // gap
    {0, 255, 0},    // tow
    {0, 0, 255},    // overlap
    {255, 255, 0},  // fuzzball
}};

inline void write_labels(const std::string& path, const LabelMap& labels) {
  std::vector<std::uint8_t> px(labels.size() * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = labels.values()[i];
    if (id >= kClassCount) throw DataError("label id out of range");
    std::copy(kPalette[id].begin(), kPalette[id].end(), px.begin() + 3 * i);
  }
  detail::write(path, labels.height(), labels.width(), PNG_COLOR_TYPE_RGB, 3, px.data());
}

/// Any PNG as gray levels in [0,1]; color images are converted to luminance.
inline Raster<double> read_gray(const std::string& path) {
  const auto d = detail::read(path, false);
  Raster<double> out(d.height, d.width);
  const std::size_t n = out.size();
  if (d.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i)
      out.values()[i] = (d.bytes[2 * i] | (d.bytes[2 * i + 1] << 8)) / 65535.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = d.bytes[i] / 255.0;
  }
  return out;
}

/// Inverse palette lookup of a label PNG.
inline LabelMap read_labels(const std::string& path) {
  const auto d = detail::read(path, true);
  LabelMap out(d.height, d.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* p = d.bytes.data() + 3 * i;
    int id = -1;
    for (int k = 0; k < kClassCount; ++k)
      if (p[0] == kPalette[k][0] && p[1] == kPalette[k][1] && p[2] == kPalette[k][2]) id = k;
    if (id < 0) throw FileError(path, "pixel color outside the label palette");
    out.values()[i] = static_cast<std::uint8_t>(id);
  }
  return out;
}

}  // namespace afpseg::png
