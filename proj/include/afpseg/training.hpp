#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "afpseg/error.hpp"
#include "afpseg/loss.hpp"
#include "afpseg/network.hpp"
#include "afpseg/optimizer.hpp"
#include "afpseg/tensor.hpp"
#include "afpseg/threading.hpp"

namespace afpseg::nn {

/// `input` may be zero-padded past the labelled area; the loss then covers
/// only the top-left valid_h x valid_w window (0 means the full extent).
template <class T>
struct BatchItem {
  const Tensor<T>* input;                    // (1, h, w, channels)
  std::span<const std::uint8_t> labels;      // valid_h * valid_w class ids
  int valid_h = 0;
  int valid_w = 0;
};

template <class T>
struct BatchGradients {
  double loss = 0.0;  // mean of per-sample losses
  Gradients<T> grads; // mean of per-sample gradients
};

/// Loss and gradients averaged over the batch. Samples may run on separate
/// threads; per-sample gradients are reduced in sample order, so the result
/// does not depend on the thread count.
template <class T>
BatchGradients<T> batch_gradients(const Network<T>& net, std::span<const BatchItem<T>> batch, int threads = 1) {
  if (batch.empty()) throw ShapeError("empty training batch");
  std::vector<Gradients<T>> per_sample(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    Tape<T> tape;
    const auto& item = batch[i];
    const auto logits = net.logits(*item.input, &tape);
    const int h = logits.extent(1), w = logits.extent(2);
    const int vh = item.valid_h > 0 ? item.valid_h : h;
    const int vw = item.valid_w > 0 ? item.valid_w : w;
    per_sample[i] = net.zero_gradients();
    if (vh == h && vw == w) {
      auto lg = loss_and_grad(softmax_channels(logits), item.labels);
      net.backward(tape, lg.d_logits, per_sample[i]);
      losses[i] = lg.loss;
      return;
    }
    auto lg = loss_and_grad(softmax_channels(crop_to(logits, vh, vw)), item.labels);
    net.backward(tape, pad_to(lg.d_logits, h, w), per_sample[i]);
    losses[i] = lg.loss;
  });
  BatchGradients<T> out{0.0, std::move(per_sample[0])};
  for (std::size_t i = 1; i < batch.size(); ++i)
    for (std::size_t p = 0; p < out.grads.size(); ++p)
      for (std::size_t k = 0; k < out.grads[p].size(); ++k) out.grads[p][k] += per_sample[i][p][k];
  const T inv = T{1} / static_cast<T>(batch.size());
  for (auto& g : out.grads)
    for (auto& v : g.values()) v *= inv;
  for (double l : losses) out.loss += l;
  out.loss /= static_cast<double>(batch.size());
  return out;
}

/// One forward/backward over the batch and one optimizer update. Returns the
/// loss measured before the update.
template <class T>
double train_step(Network<T>& net, OptimizerState<T>& opt, std::span<const BatchItem<T>> batch, int threads = 1) {
  auto bg = batch_gradients(net, batch, threads);
  if (!std::isfinite(bg.loss)) throw DataError("non-finite training loss");
  opt.apply(net, bg.grads);
  return bg.loss;
}

inline double loss_of(const Network<double>& net, const Tensor<double>& x, std::span<const std::uint8_t> labels) {
  return loss_and_grad(net.forward(x), labels).loss;
}

/// Largest discrepancy between analytic gradients and central differences
/// (f(w + eps) - f(w - eps)) / 2 eps over every parameter. Pairs that agree
/// within 1e-10 absolute count as exact; otherwise the error is relative to
/// the larger magnitude.
struct GradientCheckReport {
  double max_relative = 0.0;      // over elements with |numeric - analytic| > absolute_floor
  double max_relative_raw = 0.0;  // over elements with a gradient above absolute_floor, no floor applied
  double max_absolute = 0.0;
  std::size_t elements = 0;
  std::size_t within_floor = 0;   // settled by the absolute floor alone
};

/// Central differences against backward() for every parameter element. An
/// element counts as exact when the two differ by at most absolute_floor.
inline GradientCheckReport gradient_check_report(Network<double> net, const Tensor<double>& x,
                                                 std::span<const std::uint8_t> labels, double epsilon = 1e-5,
                                                 double absolute_floor = 1e-10) {
  Tape<double> tape;
  const auto logits = net.logits(x, &tape);
  const auto lg = loss_and_grad(softmax_channels(logits), labels);
  auto grads = net.zero_gradients();
  net.backward(tape, lg.d_logits, grads);

  GradientCheckReport r;
  auto& params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < params[p].value.size(); ++k) {
      double& w = params[p].value[k];
      const double saved = w;
      w = saved + epsilon;
      const double up = loss_of(net, x, labels);
      w = saved - epsilon;
      const double down = loss_of(net, x, labels);
      w = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = grads[p][k];
      const double diff = std::abs(numeric - analytic);
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      ++r.elements;
      r.max_absolute = std::max(r.max_absolute, diff);
      if (scale > absolute_floor) r.max_relative_raw = std::max(r.max_relative_raw, diff / scale);
      if (diff <= absolute_floor) {
        ++r.within_floor;
        continue;
      }
      r.max_relative = std::max(r.max_relative, diff / scale);
    }
  }
  return r;
}

inline double gradient_check(Network<double> net, const Tensor<double>& x, std::span<const std::uint8_t> labels,
                             double epsilon = 1e-5) {
  return gradient_check_report(std::move(net), x, labels, epsilon).max_relative;
}

}  // namespace afpseg::nn
