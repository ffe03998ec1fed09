#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>

#include <json.hpp>

#include "afpseg/error.hpp"
#include "afpseg/raster.hpp"

namespace afpseg {

/// Pixel confusion tally. Rows are predictions, columns ground truth; all
/// percentages are relative to the grand total.
class EvalReport {
 public:
  using Counts = std::array<std::array<std::uint64_t, kClassCount>, kClassCount>;

  void add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("evaluate: prediction and label sizes differ");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (predicted[i] >= kClassCount || truth[i] >= kClassCount) throw DataError("evaluate: class id out of range");
      ++counts_[predicted[i]][truth[i]];
    }
  }

  void merge(const EvalReport& other) {
    for (int p = 0; p < kClassCount; ++p)
      for (int t = 0; t < kClassCount; ++t) counts_[p][t] += other.counts_[p][t];
    loss_sum_ += other.loss_sum_;
    loss_samples_ += other.loss_samples_;
  }

  void add_loss(double sample_loss) {
    loss_sum_ += sample_loss;
    ++loss_samples_;
  }

  const Counts& counts() const noexcept { return counts_; }
  std::uint64_t count(int predicted, int truth) const { return counts_.at(predicted).at(truth); }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& row : counts_) n = std::accumulate(row.begin(), row.end(), n);
    return n;
  }

  double percent(int predicted, int truth) const { return scaled(count(predicted, truth)); }

  double prediction_percent(int predicted) const {
    const auto& row = counts_.at(predicted);
    return scaled(std::accumulate(row.begin(), row.end(), std::uint64_t{0}));
  }

  double truth_percent(int truth) const {
    std::uint64_t n = 0;
    for (const auto& row : counts_) n += row.at(truth);
    return scaled(n);
  }

  /// Diagonal sum in percent.
  double accuracy() const {
    std::uint64_t n = 0;
    for (int k = 0; k < kClassCount; ++k) n += counts_[k][k];
    return scaled(n);
  }

  /// Mean per-sample cross-entropy, NaN when no losses were recorded.
  double mean_loss() const { return loss_samples_ ? loss_sum_ / loss_samples_ : std::nan(""); }

  /// Cells in hundredths of a percent, rounded by largest remainder so that
  /// they add up to exactly 10000 whenever the matrix is non-empty.
  std::array<std::array<long, kClassCount>, kClassCount> rounded_hundredths() const {
    std::array<std::array<long, kClassCount>, kClassCount> out{};
    const std::uint64_t n = total();
    if (n == 0) return out;
    struct Cell {
      int p, t;
      double rest;
    };
    std::array<Cell, kClassCount * kClassCount> cells{};
    long assigned = 0;
    for (int p = 0; p < kClassCount; ++p)
      for (int t = 0; t < kClassCount; ++t) {
        const double exact = 10000.0 * static_cast<double>(counts_[p][t]) / static_cast<double>(n);
        out[p][t] = static_cast<long>(std::floor(exact));
        assigned += out[p][t];
        cells[p * kClassCount + t] = {p, t, exact - std::floor(exact)};
      }
    std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.rest > b.rest; });
    for (long k = 0; k < 10000 - assigned; ++k) ++out[cells[k].p][cells[k].t];
    return out;
  }

  /// Table with two-decimal percentages, prediction rows, ground-truth
  /// columns and marginal sums.
  std::string table() const {
    const auto cells = rounded_hundredths();
    auto fmt = [](long hundredths) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%9.2f", hundredths / 100.0);
      return std::string(buf);
    };
    std::string out = "Prediction \\ Ground truth\n";
    out += std::string(11, ' ');
    for (int t = 0; t < kClassCount; ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%9s", std::string(class_name(t)).c_str());
      out += buf;
    }
    out += "      Sum\n";
    std::array<long, kClassCount> column{};
    long grand = 0;
    for (int p = 0; p < kClassCount; ++p) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%-11s", std::string(class_name(p)).c_str());
      out += buf;
      long row = 0;
      for (int t = 0; t < kClassCount; ++t) {
        out += fmt(cells[p][t]);
        row += cells[p][t];
        column[t] += cells[p][t];
      }
      grand += row;
      out += fmt(row) + "\n";
    }
    out += "Sum        ";
    for (int t = 0; t < kClassCount; ++t) out += fmt(column[t]);
    out += fmt(grand) + "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "Accuracy %.2f %% over %llu pixels\n", accuracy(),
                  static_cast<unsigned long long>(total()));
    out += buf;
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json names = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    nlohmann::json percents = nlohmann::json::array();
    nlohmann::json pred = nlohmann::json::array();
    nlohmann::json truth = nlohmann::json::array();
    for (int p = 0; p < kClassCount; ++p) {
      names.push_back(std::string(class_name(p)));
      nlohmann::json crow = nlohmann::json::array(), prow = nlohmann::json::array();
      for (int t = 0; t < kClassCount; ++t) {
        crow.push_back(counts_[p][t]);
        prow.push_back(percent(p, t));
      }
      counts.push_back(crow);
      percents.push_back(prow);
      pred.push_back(prediction_percent(p));
      truth.push_back(truth_percent(p));
    }
    nlohmann::json j{{"classes", names},
                     {"rows", "prediction"},
                     {"columns", "ground_truth"},
                     {"counts", counts},
                     {"percent", percents},
                     {"prediction_marginals", pred},
                     {"truth_marginals", truth},
                     {"accuracy", accuracy()},
                     {"total_pixels", total()}};
    if (loss_samples_) j["mean_loss"] = mean_loss();
    return j;
  }

 private:
  double scaled(std::uint64_t n) const {
    const auto t = total();
    return t ? 100.0 * static_cast<double>(n) / static_cast<double>(t) : 0.0;
  }

  Counts counts_{};
  double loss_sum_ = 0.0;
  std::uint64_t loss_samples_ = 0;
};

}  // namespace afpseg
