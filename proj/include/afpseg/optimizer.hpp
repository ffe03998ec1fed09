#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "afpseg/error.hpp"
#include "afpseg/network.hpp"

namespace afpseg::nn {

enum class OptimizerKind { sgd, adam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerSettings&) const = default;
};

inline void to_json(nlohmann::json& j, const OptimizerSettings& s) {
  j = nlohmann::json{{"kind", s.kind == OptimizerKind::adam ? "adam" : "sgd"},
                     {"learning_rate", s.learning_rate},
                     {"beta1", s.beta1},
                     {"beta2", s.beta2},
                     {"epsilon", s.epsilon}};
}

inline void from_json(const nlohmann::json& j, OptimizerSettings& s) {
  if (!j.is_object()) throw ConfigError("optimizer: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") {
        const auto kind = v.get<std::string>();
        if (kind == "adam") s.kind = OptimizerKind::adam;
        else if (kind == "sgd") s.kind = OptimizerKind::sgd;
        else throw ConfigError("optimizer: unknown kind '" + kind + "'");
      } else if (key == "learning_rate") s.learning_rate = v.get<double>();
      else if (key == "beta1") s.beta1 = v.get<double>();
      else if (key == "beta2") s.beta2 = v.get<double>();
      else if (key == "epsilon") s.epsilon = v.get<double>();
      else throw ConfigError("optimizer: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
}

template <class T>
class OptimizerState {
 public:
  explicit OptimizerState(OptimizerSettings settings = {}) : settings_(settings) {}

  const OptimizerSettings& settings() const noexcept { return settings_; }
  long step_count() const noexcept { return step_; }

  /// One update of every parameter from its gradient.
  void apply(Network<T>& net, const Gradients<T>& grads) {
    auto& params = net.parameters();
    if (grads.size() != params.size()) throw ShapeError("optimizer: gradient count does not match parameters");
    ++step_;
    if (settings_.kind == OptimizerKind::sgd) {
      const T lr = static_cast<T>(settings_.learning_rate);
      for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t k = 0; k < grads[i].size(); ++k) params[i].value[k] -= lr * grads[i][k];
      return;
    }
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.value.shape());
        second_.emplace_back(p.value.shape());
      }
    }
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double lr = settings_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i].value;
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double g = grads[i][k];
        m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g);
        v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g * g);
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        w[k] = static_cast<T>(w[k] - lr * mhat / (std::sqrt(vhat) + settings_.epsilon));
      }
    }
  }

  const std::vector<Tensor<T>>& first_moments() const noexcept { return first_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return second_; }

 private:
  OptimizerSettings settings_;
  long step_ = 0;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
};

}  // namespace afpseg::nn
