#pragma once

// Encoder/decoder segmentation network. Level i runs at 1/2^i of the input
// resolution with base_features * 2^i channels. The first encoder block skips
// max pooling; decoders upscale by nearest neighbour, zero-pad to the skip
// extent and concatenate [upscaled, skip] before convolving.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afpseg/error.hpp"
#include "afpseg/kernels.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/tensor.hpp"

namespace afpseg::nn {

struct NetworkConfig {
  int levels = 4;
  int base_features = 16;
  int classes = 4;
  int kernel_size = 3;
  int input_channels = 1;

  int features(int level) const { return base_features << level; }
  /// Spatial extents must be multiples of this.
  int divisor() const { return 1 << (levels - 1); }

  void validate() const {
    if (levels < 2) throw ConfigError("network: levels must be >= 2");
    if (base_features < 1 || classes < 2 || input_channels < 1) throw ConfigError("network: non-positive width");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("network: kernel_size must be odd");
  }

  bool operator==(const NetworkConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"levels", c.levels},
                     {"base_features", c.base_features},
                     {"classes", c.classes},
                     {"kernel_size", c.kernel_size},
                     {"input_channels", c.input_channels}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  if (!j.is_object()) throw ConfigError("network config: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "levels") c.levels = v.get<int>();
      else if (key == "base_features") c.base_features = v.get<int>();
      else if (key == "classes") c.classes = v.get<int>();
      else if (key == "kernel_size") c.kernel_size = v.get<int>();
      else if (key == "input_channels") c.input_channels = v.get<int>();
      else throw ConfigError("network config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
}

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <class T>
using Gradients = std::vector<Tensor<T>>;

/// Activations kept by the forward pass for backpropagation.
template <class T>
struct Tape {
  struct Block {
    Tensor<T> input;  // block input (after pooling / concatenation)
    Tensor<T> mid;    // after first conv + ReLU
    Tensor<T> out;    // after second conv + ReLU
  };
  std::vector<Block> encoders;             // level 0 .. L-1
  std::vector<std::vector<std::uint8_t>> pool_argmax;  // index i: pooling into level i (i >= 1)
  std::vector<Block> decoders;             // level 0 .. L-2
  std::vector<Shape> upsampled_shapes;     // per decoder level, before pad_to
  Tensor<T> logits;
};

template <class T>
class Network {
 public:
  Network() = default;

  /// Parameters zero-initialised; call init() for a trainable start.
  explicit Network(NetworkConfig config) : config_(config) {
    config_.validate();
    const int k = config_.kernel_size;
    auto add_conv = [&](const std::string& prefix, int cin, int cout, int ksize) {
      params_.push_back({prefix + ".weight", Tensor<T>({ksize, ksize, cin, cout})});
      params_.push_back({prefix + ".bias", Tensor<T>({cout})});
    };
    for (int i = 0; i < config_.levels; ++i) {
      const int cin = i == 0 ? config_.input_channels : config_.features(i - 1);
      add_conv("enc" + std::to_string(i) + ".conv1", cin, config_.features(i), k);
      add_conv("enc" + std::to_string(i) + ".conv2", config_.features(i), config_.features(i), k);
    }
    for (int i = config_.levels - 2; i >= 0; --i) {
      const int cin = config_.features(i + 1) + config_.features(i);
      add_conv("dec" + std::to_string(i) + ".conv1", cin, config_.features(i), k);
      add_conv("dec" + std::to_string(i) + ".conv2", config_.features(i), config_.features(i), k);
    }
    add_conv("head", config_.features(0), config_.classes, 1);
  }

  const NetworkConfig& config() const noexcept { return config_; }
  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  /// He-style uniform weights U(-a, a), a = sqrt(6 / fan_in), zero biases.
  /// The classifier is scaled by 0.1 so initial predictions are near uniform.
  void init(std::uint64_t seed) {
    Rng rng(derive_stream(seed, 0x1417));
    for (auto& p : params_) {
      if (p.value.rank() == 1) {
        p.value.fill(T{0});
        continue;
      }
      const double fan_in = static_cast<double>(p.value.extent(0)) * p.value.extent(1) * p.value.extent(2);
      double a = std::sqrt(6.0 / fan_in);
      if (p.name == "head.weight") a *= 0.1;
      for (auto& v : p.value.values()) v = static_cast<T>(rng.uniform(-a, a));
    }
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.shape());
    return g;
  }

  template <class U>
  Network<U> cast() const {
    Network<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i].value = params_[i].value.template cast<U>();
    return out;
  }

  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.extent(3) != config_.input_channels)
      throw ShapeError("network input must be (n,h,w," + std::to_string(config_.input_channels) + "), got " +
                       to_string(x.shape()));
    const int d = config_.divisor();
    if (x.extent(1) % d || x.extent(2) % d)
      throw ShapeError("network input extents " + to_string(x.shape()) + " must be divisible by " + std::to_string(d));
  }

  /// Class scores (pre-softmax), shape (n, h, w, classes).
  Tensor<T> logits(const Tensor<T>& x, Tape<T>* tape = nullptr) const {
    check_input(x);
    Tape<T> local;
    Tape<T>& tp = tape ? *tape : local;
    const int L = config_.levels;
    tp.encoders.assign(L, {});
    tp.pool_argmax.assign(L, {});
    tp.decoders.assign(L - 1, {});
    tp.upsampled_shapes.assign(L - 1, {});

    for (int i = 0; i < L; ++i) {
      auto& blk = tp.encoders[i];
      if (i == 0) {
        blk.input = x;
      } else {
        auto pooled = maxpool2(tp.encoders[i - 1].out);
        blk.input = std::move(pooled.output);
        tp.pool_argmax[i] = std::move(pooled.argmax);
      }
      run_block(encoder_index(i), blk);
      if (!tape && i > 0) tp.encoders[i - 1].mid = {};
    }
    for (int i = L - 2; i >= 0; --i) {
      const Tensor<T>& below = i == L - 2 ? tp.encoders[L - 1].out : tp.decoders[i + 1].out;
      auto up = upsample2(below);
      tp.upsampled_shapes[i] = up.shape();
      const auto& skip = tp.encoders[i].out;
      auto& blk = tp.decoders[i];
      blk.input = concat_channels(pad_to(up, skip.extent(1), skip.extent(2)), skip);
      run_block(decoder_index(i), blk);
    }
    const std::size_t head = params_.size() - 2;
    tp.logits = conv2d(tp.decoders[0].out, params_[head].value, params_[head + 1].value, 0);
    return tape ? tp.logits : std::move(tp.logits);
  }

  /// Per-pixel class probabilities, shape (n, h, w, classes).
  Tensor<T> forward(const Tensor<T>& x) const { return softmax_channels(logits(x)); }

  /// Backpropagates d(loss)/d(logits); gradients are accumulated into `grads`.
  void backward(const Tape<T>& tp, const Tensor<T>& d_logits, Gradients<T>& grads) const {
    const int L = config_.levels;
    const std::size_t head = params_.size() - 2;
    Tensor<T> d_below;
    conv2d_backward(tp.decoders[0].out, params_[head].value, d_logits, 0, &d_below, grads[head], grads[head + 1]);

    std::vector<Tensor<T>> d_enc(L);
    for (int i = 0; i < L - 1; ++i) {
      const auto& blk = tp.decoders[i];
      Tensor<T> d_in = block_backward(decoder_index(i), blk, std::move(d_below), grads);
      const int c_up = tp.upsampled_shapes[i][3];
      auto [d_up_padded, d_skip] = split_channels(d_in, c_up);
      accumulate(d_enc[i], d_skip);
      const auto& us = tp.upsampled_shapes[i];
      d_below = upsample2_backward(crop_to(d_up_padded, us[1], us[2]));
    }
    accumulate(d_enc[L - 1], d_below);

    for (int i = L - 1; i >= 0; --i) {
      Tensor<T> d_in = block_backward(encoder_index(i), tp.encoders[i], std::move(d_enc[i]), grads, i > 0);
      if (i > 0) accumulate(d_enc[i - 1], maxpool2_backward(d_in, tp.pool_argmax[i], tp.encoders[i - 1].out.shape()));
    }
  }

 private:
  std::size_t encoder_index(int level) const { return static_cast<std::size_t>(level) * 4; }
  std::size_t decoder_index(int level) const {
    return static_cast<std::size_t>(config_.levels) * 4 + static_cast<std::size_t>(config_.levels - 2 - level) * 4;
  }

  void run_block(std::size_t p, typename Tape<T>::Block& blk) const {
    const int pad = config_.kernel_size / 2;
    blk.mid = conv2d(blk.input, params_[p].value, params_[p + 1].value, pad);
    relu_inplace(blk.mid);
    blk.out = conv2d(blk.mid, params_[p + 2].value, params_[p + 3].value, pad);
    relu_inplace(blk.out);
  }

  Tensor<T> block_backward(std::size_t p, const typename Tape<T>::Block& blk, Tensor<T> d_out, Gradients<T>& grads,
                           bool need_input_grad = true) const {
    const int pad = config_.kernel_size / 2;
    relu_backward_inplace(blk.out, d_out);
    Tensor<T> d_mid;
    conv2d_backward(blk.mid, params_[p + 2].value, d_out, pad, &d_mid, grads[p + 2], grads[p + 3]);
    relu_backward_inplace(blk.mid, d_mid);
    Tensor<T> d_in;
    conv2d_backward(blk.input, params_[p].value, d_mid, pad, need_input_grad ? &d_in : nullptr, grads[p], grads[p + 1]);
    return d_in;
  }

  static void accumulate(Tensor<T>& acc, const Tensor<T>& g) {
    if (acc.size() == 0) {
      acc = g;
      return;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }

  NetworkConfig config_;
  std::vector<Parameter<T>> params_;
};

}  // namespace afpseg::nn
