#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "afpseg/error.hpp"

namespace afpseg::nn {

using Shape = std::vector<int>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int e) { return a * static_cast<std::size_t>(e); });
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major array of rank <= 4. Activations use (batch, height, width,
/// channels); convolution kernels use (kh, kw, in, out).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    if (shape_.size() > 4) throw ShapeError("tensor rank above 4");
    for (int e : shape_)
      if (e < 0) throw ShapeError("negative tensor extent " + to_string(shape_));
    data_.assign(element_count(shape_), fill);
  }
  Tensor(std::initializer_list<int> shape, T fill = T{}) : Tensor(Shape(shape), fill) {}

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int extent(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element of a rank-4 (n, h, w, c) tensor.
  T& at(int n, int y, int x, int c) { return data_[offset4(n, y, x, c)]; }
  const T& at(int n, int y, int x, int c) const { return data_[offset4(n, y, x, c)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset4(int n, int y, int x, int c) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c;
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace afpseg::nn
