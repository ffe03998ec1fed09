#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "afpseg/error.hpp"
#include "afpseg/tensor.hpp"

namespace afpseg::nn {

template <class T>
struct LossAndGrad {
  double loss = 0.0;
  Tensor<T> d_logits;
};

/// Mean pixel-wise cross-entropy -log q(label) and its gradient with respect
/// to the pre-softmax scores, (q - onehot) / N with N the pixel count.
template <class T>
LossAndGrad<T> loss_and_grad(const Tensor<T>& probs, std::span<const std::uint8_t> labels) {
  const int classes = probs.shape().back();
  const std::size_t pixels = probs.size() / classes;
  if (labels.size() != pixels)
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(pixels) + " pixels");
  LossAndGrad<T> r{0.0, probs};
  const T inv_n = T{1} / static_cast<T>(pixels);
  double sum = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    const int y = labels[p];
    if (y >= classes) throw DataError("label id " + std::to_string(y) + " >= class count");
    const T* q = probs.data() + p * classes;
    sum -= std::log(std::max(static_cast<double>(q[y]), std::numeric_limits<double>::min()));
    T* g = r.d_logits.data() + p * classes;
    for (int k = 0; k < classes; ++k) g[k] = (q[k] - (k == y ? T{1} : T{0})) * inv_n;
  }
  r.loss = pixels ? sum / static_cast<double>(pixels) : 0.0;
  return r;
}

}  // namespace afpseg::nn
