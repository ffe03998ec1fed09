#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "afpseg/checkpoint.hpp"
#include "afpseg/config.hpp"
#include "afpseg/dataset.hpp"
#include "afpseg/error.hpp"
#include "afpseg/eval_report.hpp"
#include "afpseg/kernels.hpp"
#include "afpseg/loss.hpp"
#include "afpseg/network.hpp"
#include "afpseg/optimizer.hpp"
#include "afpseg/png_io.hpp"
#include "afpseg/raster.hpp"
#include "afpseg/rng.hpp"
#include "afpseg/tensor.hpp"
#include "afpseg/threading.hpp"
#include "afpseg/training.hpp"

namespace afpseg {

/// Per-image standardization into a (1, h, w, 1) tensor: subtract the mean,
/// divide by the standard deviation; near-constant maps become all zeros.
template <class V>
nn::Tensor<float> normalize_depth(std::span<const V> values, int height, int width) {
  if (values.size() != static_cast<std::size_t>(height) * width) throw ShapeError("normalize_depth: size mismatch");
  nn::Tensor<float> out({1, height, width, 1});
  if (values.empty()) return out;
  double mean = 0.0;
  for (V v : values) mean += static_cast<double>(v);
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (V v : values) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  const double sd = std::sqrt(var / static_cast<double>(values.size()));
  if (!(sd >= 1e-8)) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<float>((static_cast<double>(values[i]) - mean) / sd);
  return out;
}

template <class V>
nn::Tensor<float> normalize_depth(const Raster<V>& x) {
  return normalize_depth(std::span<const V>(x.values()), x.height(), x.width());
}

inline int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

/// Normalized input zero-padded at the bottom/right to the network divisor.
template <class V>
nn::Tensor<float> network_input(std::span<const V> values, int height, int width, int divisor) {
  return nn::pad_to(normalize_depth(values, height, width), round_up(height, divisor), round_up(width, divisor));
}

/// Per-pixel argmax over the top-left (height, width) window of
/// (1, H, W, C) scores; ties go to the lowest class id.
template <class T>
LabelMap argmax_labels(const nn::Tensor<T>& scores, int height, int width) {
  if (scores.rank() != 4 || scores.extent(0) != 1 || scores.extent(1) < height || scores.extent(2) < width)
    throw ShapeError("argmax_labels: scores " + nn::to_string(scores.shape()) + " do not cover the window");
  const int classes = scores.extent(3);
  LabelMap out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const T* q = &scores.at(0, r, c, 0);
      out(r, c) = static_cast<std::uint8_t>(std::max_element(q, q + classes) - q);
    }
  return out;
}

/// Forward pass on any input size: pad to the divisor, crop the labels back.
template <class V>
LabelMap predict(const nn::Network<float>& net, std::span<const V> values, int height, int width) {
  const auto x = network_input(values, height, width, net.config().divisor());
  return argmax_labels(net.logits(x), height, width);
}

template <class V>
LabelMap predict(const nn::Network<float>& net, const Raster<V>& depth) {
  return predict(net, std::span<const V>(depth.values()), depth.height(), depth.width());
}

/// Samples either held in memory or read from an AFPD file.
class SampleSet {
 public:
  SampleSet(std::vector<StoredSample> samples, int height, int width)
      : source_(std::move(samples)), height_(height), width_(width) {}
  explicit SampleSet(DatasetFile file) : source_(std::move(file)) {
    const auto& f = std::get<DatasetFile>(source_);
    height_ = f.height();
    width_ = f.width();
  }

  static SampleSet open(const std::string& path) { return SampleSet(DatasetFile(path)); }

  std::size_t size() const {
    if (const auto* v = std::get_if<std::vector<StoredSample>>(&source_)) return v->size();
    return std::get<DatasetFile>(source_).size();
  }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  /// Not thread-safe for file-backed sets.
  StoredSample get(std::size_t i) {
    if (auto* v = std::get_if<std::vector<StoredSample>>(&source_)) return v->at(i);
    return std::get<DatasetFile>(source_).read(static_cast<std::uint32_t>(i));
  }

 private:
  std::variant<std::vector<StoredSample>, DatasetFile> source_;
  int height_ = 0;
  int width_ = 0;
};

inline std::vector<StoredSample> generate_samples(const GeneratorConfig& config, std::uint32_t count,
                                                  std::uint64_t seed, const TextureSpec& textures = {},
                                                  int threads = 1) {
  config.validate();
  const auto source = textures.make_source();
  std::vector<StoredSample> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const auto ex = generate_example(config, seed, i, source);
    out[i].depth.assign(ex.x.values().begin(), ex.x.values().end());
    out[i].labels.assign(ex.y.values().begin(), ex.y.values().end());
  });
  return out;
}

/// Confusion tally and mean loss of `net` over every sample of `data`.
/// Samples are read in chunks and run in parallel; integer tallies merge in
/// sample order.
inline EvalReport evaluate(const nn::Network<float>& net, SampleSet& data, int threads = 1) {
  const int h = data.height(), w = data.width();
  const int d = net.config().divisor();
  EvalReport report;
  const std::size_t chunk = static_cast<std::size_t>(std::max(threads, 1)) * 4;
  std::vector<StoredSample> batch;
  std::vector<EvalReport> partial;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, data.size() - begin);
    batch.clear();
    for (std::size_t k = 0; k < n; ++k) batch.push_back(data.get(begin + k));
    partial.assign(n, EvalReport{});
    parallel_for(n, threads, [&](std::size_t k) {
      const auto x = network_input(std::span<const float>(batch[k].depth), h, w, d);
      const auto probs = nn::crop_to(nn::softmax_channels(net.logits(x)), h, w);
      const auto pred = argmax_labels(probs, h, w);
      partial[k].add(pred.values(), batch[k].labels);
      partial[k].add_loss(nn::loss_and_grad(probs, batch[k].labels).loss);
    });
    for (const auto& p : partial) report.merge(p);
  }
  return report;
}

inline EvalReport evaluate(const std::string& checkpoint, const std::string& dataset, int threads = 1) {
  const auto net = load_checkpoint(checkpoint);
  auto data = SampleSet::open(dataset);
  return evaluate(net, data, threads);
}

struct TrainConfig {
  GeneratorConfig generator;
  nn::NetworkConfig network;
  nn::OptimizerSettings optimizer;
  TextureSpec textures;
  int epochs = 10;
  int batch_size = 8;
  std::uint32_t train_count = 500;
  std::uint32_t val_count = 100;
  std::uint64_t seed = 0;
  std::string train_data;  // AFPD path; generated in memory when empty
  std::string val_data;
  std::string checkpoint = "model.afpw";
  std::string metrics_log = "metrics.jsonl";

  void validate() const {
    generator.validate();
    network.validate();
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (train_count == 0 || val_count == 0) throw ConfigError("train config: train_count and val_count must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"generator", c.generator},   {"network", c.network},         {"optimizer", c.optimizer},
                     {"textures", c.textures},     {"epochs", c.epochs},           {"batch_size", c.batch_size},
                     {"train_count", c.train_count}, {"val_count", c.val_count},   {"seed", c.seed},
                     {"train_data", c.train_data}, {"val_data", c.val_data},       {"checkpoint", c.checkpoint},
                     {"metrics_log", c.metrics_log}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "generator") c.generator = v.get<GeneratorConfig>();
      else if (key == "network") c.network = v.get<nn::NetworkConfig>();
      else if (key == "optimizer") c.optimizer = v.get<nn::OptimizerSettings>();
      else if (key == "textures") c.textures = v.get<TextureSpec>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "train_count") c.train_count = v.get<std::uint32_t>();
      else if (key == "val_count") c.val_count = v.get<std::uint32_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "train_data") c.train_data = v.get<std::string>();
      else if (key == "val_data") c.val_data = v.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
      else if (key == "metrics_log") c.metrics_log = v.get<std::string>();
      else throw ConfigError("train config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

/// Validation scenes come from the same generator with a disjoint seed range.
inline constexpr std::uint64_t validation_seed(std::uint64_t seed) noexcept { return seed ^ (1ull << 63); }

inline constexpr std::uint64_t kInitStream = 0x696e6974;
inline constexpr std::uint64_t kShuffleStream = 0x73687566;

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;  // fraction of correctly labelled pixels
  double val_loss = 0.0;
};

inline nlohmann::json metrics_line(const EpochMetrics& m) {
  return nlohmann::json{{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"val_accuracy", m.val_accuracy}};
}

struct TrainResult {
  nn::Network<float> network;
  std::vector<EpochMetrics> history;
  EvalReport initial;  // validation before the first update
  EvalReport last;      // validation after the final epoch
};

struct TrainHooks {
  std::function<void(const EvalReport&)> on_start;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Loads `path` when it exists, otherwise generates it there; an empty path
/// keeps the samples in memory.
inline SampleSet obtain_samples(const std::string& path, const GeneratorConfig& config, std::uint32_t count,
                                std::uint64_t seed, const TextureSpec& textures, int threads) {
  if (path.empty()) return SampleSet(generate_samples(config, count, seed, textures, threads), config.height_px, config.width_px);
  if (!std::filesystem::exists(path)) generate_dataset(config, count, seed, path, textures, threads);
  return SampleSet::open(path);
}

/// Shuffled mini-batch training with per-epoch validation. Writes the
/// checkpoint and a JSON-lines metrics log when the paths are non-empty.
inline TrainResult train(const TrainConfig& config, int threads = 1, const TrainHooks& hooks = {}) {
  config.validate();
  auto train_set =
      obtain_samples(config.train_data, config.generator, config.train_count, config.seed, config.textures, threads);
  auto val_set = obtain_samples(config.val_data, config.generator, config.val_count, validation_seed(config.seed),
                                config.textures, threads);
  if (train_set.size() == 0) throw DataError("training set is empty");

  TrainResult result{nn::Network<float>(config.network), {}, {}, {}};
  auto& net = result.network;
  net.init(derive_stream(config.seed, kInitStream));
  nn::OptimizerState<float> opt(config.optimizer);
  Rng shuffle_rng(derive_stream(config.seed, kShuffleStream));

  std::ofstream log;
  if (!config.metrics_log.empty()) {
    log.open(config.metrics_log, std::ios::trunc);
    if (!log) throw FileError(config.metrics_log, "cannot open for writing");
  }

  result.initial = evaluate(net, val_set, threads);
  if (hooks.on_start) hooks.on_start(result.initial);

  const int h = train_set.height(), w = train_set.width();
  const int d = net.config().divisor();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - begin);
      std::vector<StoredSample> samples;
      std::vector<nn::Tensor<float>> inputs;
      samples.reserve(n);
      inputs.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        samples.push_back(train_set.get(order[begin + k]));
        inputs.push_back(network_input(std::span<const float>(samples.back().depth), h, w, d));
      }
      std::vector<nn::BatchItem<float>> batch;
      for (std::size_t k = 0; k < n; ++k) batch.push_back({&inputs[k], samples[k].labels, h, w});
      loss_sum += nn::train_step(net, opt, std::span<const nn::BatchItem<float>>(batch), threads) *
                  static_cast<double>(n);
    }
    const auto report = evaluate(net, val_set, threads);
    EpochMetrics m{epoch, loss_sum / static_cast<double>(order.size()), report.accuracy() / 100.0, report.mean_loss()};
    result.history.push_back(m);
    result.last = report;
    if (log.is_open()) {
      log << metrics_line(m).dump() << '\n';
      log.flush();
      if (!log) throw FileError(config.metrics_log, "write failed");
    }
    if (hooks.on_epoch) hooks.on_epoch(m);
  }
  if (!config.checkpoint.empty()) save_checkpoint(config.checkpoint, net);
  return result;
}

inline bool is_dataset_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[4] = {};
  is.read(magic, 4);
  return is.gcount() == 4 && std::string(magic, 4) == "AFPD";
}

/// Depth map from a grayscale PNG or from sample `index` of an AFPD file.
inline DepthMap load_depth(const std::string& path, std::uint32_t index = 0) {
  if (!std::filesystem::exists(path)) throw FileError(path, "no such file");
  if (!is_dataset_file(path)) return png::read_gray(path);
  DatasetFile file(path);
  return to_depth_map(file.read(index), file.height(), file.width());
}

inline LabelMap infer(const nn::Network<float>& net, const DepthMap& depth) { return predict(net, depth); }

inline LabelMap infer(const std::string& checkpoint, const std::string& input, std::uint32_t index = 0) {
  return infer(load_checkpoint(checkpoint), load_depth(input, index));
}

}  // namespace afpseg
