#pragma once

// Raster grids and the drawing primitives used to turn scene geometry into
// clean depth maps and label maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afpseg/config.hpp"
#include "afpseg/error.hpp"
#include "afpseg/scene.hpp"

namespace afpseg {

/// Row-major 2-D grid.
template <class T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw ShapeError("raster extents must be non-negative");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool contains(int row, int col) const noexcept { return row >= 0 && col >= 0 && row < height_ && col < width_; }

  T& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  const T& operator()(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }

  bool same_extents(int height, int width) const noexcept { return height_ == height && width_ == width; }
  template <class U>
  bool same_extents(const Raster<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Raster&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Depth in units of one tow layer: background 0, single tow 1, overlap 2.
using DepthMap = Raster<double>;
using LabelMap = Raster<std::uint8_t>;
using Mask = Raster<std::uint8_t>;

enum class PixelClass : std::uint8_t { gap = 0, tow = 1, overlap = 2, fuzzball = 3 };

inline constexpr int kClassCount = 4;

inline constexpr std::uint8_t class_id(PixelClass c) noexcept { return static_cast<std::uint8_t>(c); }

inline constexpr std::string_view class_name(int id) noexcept {
  switch (id) {
    case 0: return "Gap";
    case 1: return "Tow";
    case 2: return "Overlap";
    case 3: return "Fuzzball";
    default: return "?";
  }
}

inline constexpr double kDefaultTransitionPx = 6.0;
inline constexpr double kFiberDepth = 0.15;

/// Even-odd scanline fill. A pixel is covered iff its center (col + 0.5,
/// row + 0.5) lies inside the polygon; anything off-canvas is clipped.
template <class T>
void fill_polygon(std::span<const Point2> vertices, Raster<T>& canvas, T value) {
  if (vertices.size() < 3) throw GeometryError("fill_polygon needs at least 3 vertices");
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -ymin;
  for (const auto& v : vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw GeometryError("fill_polygon: non-finite vertex");
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  const int row_begin = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int row_end = std::min(canvas.height(), static_cast<int>(std::ceil(ymax + 0.5)) + 1);

  std::vector<double> crossings;
  const std::size_t n = vertices.size();
  for (int row = row_begin; row < row_end; ++row) {
    const double y = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = vertices[i];
      const Point2& b = vertices[j];
      if ((a.y > y) != (b.y > y)) crossings.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // centers strictly left of the right crossing and at/after the left one
      const double lo = std::max(crossings[k] - 0.5, -1.0);
      const double hi = std::min(crossings[k + 1] - 0.5, static_cast<double>(canvas.width()));
      int c0 = static_cast<int>(std::ceil(lo));
      int c1 = static_cast<int>(std::ceil(hi));
      c0 = std::max(c0, 0);
      c1 = std::min(c1, canvas.width());
      for (int col = c0; col < c1; ++col) canvas(row, col) = value;
    }
  }
}

namespace detail {

// Exact 1-D squared distance transform (lower envelope of parabolas).
inline void squared_edt_1d(std::span<const double> f, std::span<double> out, std::vector<int>& v,
                           std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[k] = q;
      z[k + 1] = inf;
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
    }
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double d = q - v[j];
    out[q] = d * d + f[v[j]];
  }
}

}  // namespace detail

/// Exact Euclidean distance from every mask pixel to the nearest pixel outside
/// the mask; pixels beyond the canvas border count as outside. Separable
/// two-pass transform (columns, then rows).
inline Raster<double> one_sided_distance_transform(const Mask& mask) {
  const int h = mask.height() + 2;
  const int w = mask.width() + 2;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(h) * w, 0.0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask(r, c)) grid[static_cast<std::size_t>(r + 1) * w + c + 1] = inf;

  std::vector<double> line_in(std::max(h, w)), line_out(std::max(h, w));
  std::vector<int> v;
  std::vector<double> z;
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) line_in[r] = grid[static_cast<std::size_t>(r) * w + c];
    detail::squared_edt_1d(std::span<const double>(line_in.data(), h), std::span<double>(line_out.data(), h), v, z);
    for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = line_out[r];
  }
  for (int r = 0; r < h; ++r) {
    std::span<double> row(grid.data() + static_cast<std::size_t>(r) * w, w);
    std::copy(row.begin(), row.end(), line_in.begin());
    detail::squared_edt_1d(std::span<const double>(line_in.data(), w), row, v, z);
  }

  Raster<double> out(mask.height(), mask.width(), 0.0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask(r, c)) out(r, c) = std::sqrt(grid[static_cast<std::size_t>(r + 1) * w + c + 1]);
  return out;
}

/// Logistic ramp centered at transition_px / 2 with slope 8 / transition_px.
inline double sigmoid_profile(double d, double transition_px) {
  if (!(transition_px > 0.0)) throw ConfigError("sigmoid transition_px must be positive");
  const double k = 8.0 / transition_px;
  return 1.0 / (1.0 + std::exp(-k * (d - 0.5 * transition_px)));
}

struct TowRaster {
  DepthMap z;
  LabelMap y;
  Mask top_mask;
};

/// Closed outline of tow `column`: left edge through the control points, right
/// edge offset by t. The ends are extended vertically past the canvas so
/// jitter of the first/last control row never uncovers border pixels.
inline std::vector<Point2> tow_polygon(const ControlGrid& grid, int column, int canvas_height) {
  const double t = grid.spacing;
  std::vector<Point2> left;
  left.reserve(grid.rows + 2);
  const Point2 first = grid.at(0, column);
  const Point2 last = grid.at(grid.rows - 1, column);
  left.push_back({first.x, std::min(first.y, 0.0) - t});
  for (int r = 0; r < grid.rows; ++r) left.push_back(grid.at(r, column));
  left.push_back({last.x, std::max(last.y, static_cast<double>(canvas_height)) + t});

  std::vector<Point2> poly(left);
  for (auto it = left.rbegin(); it != left.rend(); ++it) poly.push_back({it->x + t, it->y});
  return poly;
}

/// Tows in drawing order: the shifted column first (it ends up buried), the
/// rest left to right.
inline std::vector<int> tow_draw_order(const ControlGrid& grid) {
  std::vector<int> order;
  if (grid.shifted_column) order.push_back(*grid.shifted_column);
  for (int c = 0; c < grid.columns; ++c)
    if (!grid.shifted_column || c != *grid.shifted_column) order.push_back(c);
  return order;
}

namespace detail {

// Distance from each pixel of `inside` to the nearest pixel outside it, with
// the canvas extended by edge replication so the border is not an edge.
inline Raster<double> replicated_distance(const Mask& inside, int pad) {
  const int h = inside.height();
  const int w = inside.width();
  Mask padded(h + 2 * pad, w + 2 * pad);
  for (int r = 0; r < padded.height(); ++r) {
    const int sr = std::clamp(r - pad, 0, h - 1);
    for (int c = 0; c < padded.width(); ++c) padded(r, c) = inside(sr, std::clamp(c - pad, 0, w - 1));
  }
  const Raster<double> full = one_sided_distance_transform(padded);
  Raster<double> out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = full(r + pad, c + pad);
  return out;
}

}  // namespace detail

/// Draws every tow polygon into a clean depth map and label map. Where a tow
/// lands on earlier tows it adds sigma(d) on top of the existing depth, d being
/// the distance to the part of the tow that covers fresh ground: the buried
/// edge is smooth, the top tow's own edge is a sharp step.
inline TowRaster rasterize_tows(const ControlGrid& grid, const GeneratorConfig& config,
                                double transition_px = kDefaultTransitionPx) {
  config.validate();
  if (!(transition_px > 0.0)) throw ConfigError("sigmoid transition_px must be positive");
  const int h = config.height_px;
  const int w = config.width_px;
  TowRaster out{DepthMap(h, w, 0.0), LabelMap(h, w, class_id(PixelClass::gap)), Mask(h, w, 0)};
  Raster<std::uint8_t> coverage(h, w, 0);
  const int pad = static_cast<int>(std::ceil(transition_px)) + 2;

  Mask tow(h, w);
  for (const int column : tow_draw_order(grid)) {
    std::fill(tow.storage().begin(), tow.storage().end(), 0);
    const auto poly = tow_polygon(grid, column, h);
    fill_polygon<std::uint8_t>(poly, tow, 1);

    int col_lo = w, col_hi = -1;
    bool overlaps = false;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!tow(r, c)) continue;
        col_lo = std::min(col_lo, c);
        col_hi = std::max(col_hi, c);
        overlaps |= coverage(r, c) > 0;
      }
    if (col_hi < 0) continue;

    if (overlaps) {
      // Window around the tow; outside it nothing is fresh ground, so edge
      // replication of the window is equivalent to the full canvas.
      const int c0 = std::max(0, col_lo - pad);
      const int c1 = std::min(w, col_hi + 1 + pad);
      Mask inside(h, c1 - c0);
      for (int r = 0; r < h; ++r)
        for (int c = c0; c < c1; ++c) inside(r, c - c0) = !(tow(r, c) && coverage(r, c) == 0);
      const Raster<double> dist = detail::replicated_distance(inside, pad);
      for (int r = 0; r < h; ++r)
        for (int c = col_lo; c <= col_hi; ++c) {
          if (!tow(r, c)) continue;
          if (coverage(r, c) > 0)
            out.z(r, c) += sigmoid_profile(dist(r, c - c0), transition_px);
          else
            out.z(r, c) = 1.0;
          out.top_mask(r, c) = 1;
        }
    } else {
      for (int r = 0; r < h; ++r)
        for (int c = col_lo; c <= col_hi; ++c)
          if (tow(r, c)) out.z(r, c) = 1.0;
    }
    for (int r = 0; r < h; ++r)
      for (int c = col_lo; c <= col_hi; ++c)
        if (tow(r, c) && coverage(r, c) < 255) ++coverage(r, c);
  }

  for (std::size_t i = 0; i < coverage.size(); ++i) {
    const auto n = coverage.values()[i];
    out.y.values()[i] = class_id(n == 0 ? PixelClass::gap : n == 1 ? PixelClass::tow : PixelClass::overlap);
  }
  return out;
}

/// Visits the pixels of the Bresenham line between the pixels containing a
/// and b (including both ends), without clipping.
template <class Visit>
void bresenham(Point2 a, Point2 b, Visit&& visit) {
  int x0 = static_cast<int>(std::floor(a.x));
  int y0 = static_cast<int>(std::floor(a.y));
  const int x1 = static_cast<int>(std::floor(b.x));
  const int y1 = static_cast<int>(std::floor(b.y));
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    visit(y0, x0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

/// Draws each fiber as a 1-px line: +fiber_depth per fiber crossing a pixel,
/// label forced to fuzzball.
inline void render_fuzzball(const FuzzballGeometry& geom, DepthMap& z, LabelMap& y,
                            double fiber_depth = kFiberDepth) {
  if (!z.same_extents(y)) throw ShapeError("render_fuzzball: depth and label extents differ");
  for (const auto& fiber : geom.fibers) {
    bresenham(fiber.p0, fiber.p1, [&](int row, int col) {
      if (!z.contains(row, col)) return;
      z(row, col) += fiber_depth;
      y(row, col) = class_id(PixelClass::fuzzball);
    });
  }
}

}  // namespace afpseg
