#pragma once

// Command-line front end. run() returns the process exit code:
// 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "afpseg/checkpoint.hpp"
#include "afpseg/dataset.hpp"
#include "afpseg/error.hpp"
#include "afpseg/pipeline.hpp"
#include "afpseg/png_io.hpp"
#include "afpseg/selftest.hpp"

namespace afpseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Semantically invalid invocation detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FileError(path, "cannot open config");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FileError(path, std::string("invalid JSON: ") + e.what());
  }
}

inline int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

inline std::string fraction_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = default_threads();
  bool json = false;
  std::string textures;
  std::uint32_t count = 100;
  int epochs = 0;
  int batch_size = 0;
  std::uint32_t train_count = 0;
  std::uint32_t val_count = 0;
  std::string train_data;
  std::string val_data;
  std::string metrics;
  std::string checkpoint;
  std::string data;
  std::string input;
  std::uint32_t index = 0;
};

inline constexpr const char* kPrecedence =
    "Settings resolve as: command-line flag > --config file > built-in default.";

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Synthetic depth-map generator and encoder/decoder segmentation network for fiber-placement defects",
                 "afpseg"};
    app.footer(kPrecedence);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    auto threads_opt = [&](CLI::App* sub) {
      sub->add_option("--threads", o_.threads, "Worker threads (1 gives bitwise reproducible runs)")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
    };

    auto* gen = app.add_subcommand("generate", "Render a dataset of synthetic depth maps into an AFPD file");
    gen->footer(kPrecedence);
    gen->add_option("--config", o_.config, "Generator JSON, or a train config whose generator block is used")
        ->check(CLI::ExistingFile);
    auto* gen_count = gen->add_option("--count", o_.count, "Number of samples")->capture_default_str();
    auto* gen_seed = gen->add_option("--seed", o_.seed, "Base seed; sample i uses seed XOR i")->capture_default_str();
    gen->add_option("--out", o_.out, "Output .afpd path")->required();
    auto* gen_tex = gen->add_option("--textures", o_.textures, "Directory of PNG textures (default: procedural)");
    threads_opt(gen);
    gen->add_flag("--json", o_.json, "Print a JSON summary");

    auto* tr = app.add_subcommand("train", "Train a network on generated data");
    tr->footer(kPrecedence);
    tr->add_option("--config", o_.config, "Train config JSON")->check(CLI::ExistingFile);
    auto* tr_seed = tr->add_option("--seed", o_.seed, "Seed for data, initialization and shuffling");
    auto* tr_epochs = tr->add_option("--epochs", o_.epochs, "Epochs")->check(CLI::PositiveNumber);
    auto* tr_batch = tr->add_option("--batch-size", o_.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    auto* tr_ntrain = tr->add_option("--train-count", o_.train_count, "Training samples")->check(CLI::PositiveNumber);
    auto* tr_nval = tr->add_option("--val-count", o_.val_count, "Validation samples")->check(CLI::PositiveNumber);
    auto* tr_tdata = tr->add_option("--train-data", o_.train_data, "AFPD training set (generated there if missing)");
    auto* tr_vdata = tr->add_option("--val-data", o_.val_data, "AFPD validation set (generated there if missing)");
    auto* tr_out = tr->add_option("--out", o_.out, "Checkpoint path (default model.afpw)");
    auto* tr_metrics = tr->add_option("--metrics", o_.metrics, "JSON-lines metrics log (default metrics.jsonl)");
    auto* tr_tex = tr->add_option("--textures", o_.textures, "Directory of PNG textures (default: procedural)");
    threads_opt(tr);
    tr->add_flag("--json", o_.json, "Print the final validation report as JSON");

    auto* ev = app.add_subcommand("eval", "Confusion matrix of a checkpoint on an AFPD dataset");
    ev->add_option("--checkpoint", o_.checkpoint, "AFPW checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", o_.data, "AFPD dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", o_.out, "Also write the JSON report to this path");
    threads_opt(ev);
    ev->add_flag("--json", o_.json, "Print the report as JSON instead of a table");

    auto* inf = app.add_subcommand("infer", "Segment one depth map (grayscale PNG or AFPD sample)");
    inf->add_option("--checkpoint", o_.checkpoint, "AFPW checkpoint")->required()->check(CLI::ExistingFile);
    inf->add_option("--input", o_.input, "Grayscale PNG or AFPD file")->required()->check(CLI::ExistingFile);
    inf->add_option("--index", o_.index, "Sample index when the input is an AFPD file")->capture_default_str();
    inf->add_option("--out", o_.out, "Writes <out>_depth.png and <out>_labels.png");
    inf->add_flag("--json", o_.json, "Print class fractions as JSON");

    auto* st = app.add_subcommand("selftest", "Gradient check and brute-force kernel comparisons");
    st->add_option("--seed", o_.seed, "Seed for the random instances")->capture_default_str();

    auto* pv = app.add_subcommand("preview", "Export one dataset sample as a depth/label PNG pair");
    pv->add_option("--data", o_.data, "AFPD dataset")->required()->check(CLI::ExistingFile);
    pv->add_option("--index", o_.index, "Sample index")->capture_default_str();
    pv->add_option("--out", o_.out, "Prefix; writes <out>_depth.png and <out>_labels.png")->required();

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out_, err_);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out_, err_);
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n\n";
      const CLI::App* shown = &app;
      for (const auto* sub : app.get_subcommands()) shown = sub;
      err_ << shown->help();
      return kExitUsage;
    }

    try {
      if (gen->parsed()) {
        flags_.count = gen_count->count() > 0;
        flags_.seed = gen_seed->count() > 0;
        flags_.textures = gen_tex->count() > 0;
        return generate();
      }
      if (tr->parsed()) {
        flags_.seed = tr_seed->count() > 0;
        flags_.textures = tr_tex->count() > 0;
        flags_.epochs = tr_epochs->count() > 0;
        flags_.batch_size = tr_batch->count() > 0;
        flags_.train_count = tr_ntrain->count() > 0;
        flags_.val_count = tr_nval->count() > 0;
        flags_.train_data = tr_tdata->count() > 0;
        flags_.val_data = tr_vdata->count() > 0;
        flags_.out = tr_out->count() > 0;
        flags_.metrics = tr_metrics->count() > 0;
        return train();
      }
      if (ev->parsed()) return eval();
      if (inf->parsed()) return infer();
      if (st->parsed()) return selftest();
      if (pv->parsed()) return preview(*pv);
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitFailure;
    }
    return kExitUsage;
  }

 private:
  struct Given {
    bool count = false, seed = false, textures = false, epochs = false, batch_size = false, train_count = false,
         val_count = false, train_data = false, val_data = false, out = false, metrics = false;
  };

  TextureSpec texture_spec(TextureSpec from_file) const {
    if (flags_.textures) from_file.directory = o_.textures;
    return from_file;
  }

  int generate() {
    GeneratorConfig config;
    TextureSpec textures;
    std::uint32_t count = o_.count;
    std::uint64_t seed = o_.seed;
    if (!o_.config.empty()) {
      const auto j = read_json_file(o_.config);
      if (j.is_object() && j.contains("generator")) {
        const auto tc = j.get<TrainConfig>();
        config = tc.generator;
        textures = tc.textures;
        if (!flags_.count) count = tc.train_count;
        if (!flags_.seed) seed = tc.seed;
      } else {
        config = j.get<GeneratorConfig>();
      }
    }
    textures = texture_spec(textures);
    generate_dataset(config, count, seed, o_.out, textures, o_.threads);
    if (o_.json) {
      out_ << nlohmann::json{{"path", o_.out},
                             {"count", count},
                             {"height", config.height_px},
                             {"width", config.width_px},
                             {"seed", seed}}
                  .dump()
           << "\n";
    } else {
      out_ << "wrote " << count << " samples of " << config.height_px << "x" << config.width_px << " to " << o_.out
           << "\n";
    }
    return kExitOk;
  }

  int train() {
    TrainConfig config;
    if (!o_.config.empty()) config = read_json_file(o_.config).get<TrainConfig>();
    if (flags_.seed) config.seed = o_.seed;
    if (flags_.epochs) config.epochs = o_.epochs;
    if (flags_.batch_size) config.batch_size = o_.batch_size;
    if (flags_.train_count) config.train_count = o_.train_count;
    if (flags_.val_count) config.val_count = o_.val_count;
    if (flags_.train_data) config.train_data = o_.train_data;
    if (flags_.val_data) config.val_data = o_.val_data;
    if (flags_.out) config.checkpoint = o_.out;
    if (flags_.metrics) config.metrics_log = o_.metrics;
    config.textures = texture_spec(config.textures);
    config.validate();

    TrainHooks hooks;
    hooks.on_start = [&](const EvalReport& r) {
      err_ << "epoch 0 val_loss " << fraction_text(r.mean_loss()) << " val_accuracy "
           << fraction_text(r.accuracy() / 100.0) << "\n";
    };
    hooks.on_epoch = [&](const EpochMetrics& m) {
      err_ << "epoch " << m.epoch << "/" << config.epochs << " train_loss " << fraction_text(m.train_loss)
           << " val_loss " << fraction_text(m.val_loss) << " val_accuracy " << fraction_text(m.val_accuracy) << "\n";
    };
    const auto result = afpseg::train(config, o_.threads, hooks);
    if (o_.json) {
      out_ << result.last.to_json().dump(2) << "\n";
    } else {
      out_ << result.last.table();
      if (!config.checkpoint.empty()) out_ << "checkpoint " << config.checkpoint << "\n";
    }
    return kExitOk;
  }

  int eval() {
    const auto report = evaluate(o_.checkpoint, o_.data, o_.threads);
    if (!o_.out.empty()) {
      std::ofstream os(o_.out, std::ios::trunc);
      if (!os) throw FileError(o_.out, "cannot open for writing");
      os << report.to_json().dump(2) << "\n";
      if (!os) throw FileError(o_.out, "write failed");
    }
    if (o_.json) out_ << report.to_json().dump(2) << "\n";
    else out_ << report.table();
    return kExitOk;
  }

  int infer() {
    const auto net = load_checkpoint(o_.checkpoint);
    if (is_dataset_file(o_.input)) {
      DatasetFile file(o_.input);
      if (o_.index >= file.size())
        throw UsageError("--index " + std::to_string(o_.index) + " out of range for " + std::to_string(file.size()) +
                         " samples");
    }
    const auto depth = load_depth(o_.input, o_.index);
    const auto labels = afpseg::infer(net, depth);
    if (!o_.out.empty()) {
      png::write_depth(o_.out + "_depth.png", depth);
      png::write_labels(o_.out + "_labels.png", labels);
    }
    std::array<std::uint64_t, kClassCount> hist{};
    for (auto v : labels.values()) ++hist[v];
    nlohmann::json fractions;
    for (int k = 0; k < kClassCount; ++k)
      fractions[std::string(class_name(k))] = static_cast<double>(hist[k]) / static_cast<double>(labels.size());
    if (o_.json) {
      out_ << nlohmann::json{{"height", labels.height()}, {"width", labels.width()}, {"fractions", fractions}}.dump()
           << "\n";
    } else {
      out_ << labels.height() << "x" << labels.width() << " labels:";
      for (int k = 0; k < kClassCount; ++k)
        out_ << " " << class_name(k) << " " << fraction_text(fractions[std::string(class_name(k))].get<double>());
      out_ << "\n";
    }
    return kExitOk;
  }

  int selftest() {
    bool all = true;
    for (const auto& r : run_selftest(o_.seed)) {
      out_ << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
      all = all && r.passed;
    }
    return all ? kExitOk : kExitFailure;
  }

  int preview(const CLI::App& sub) {
    DatasetFile file(o_.data);
    if (o_.index >= file.size()) {
      err_ << "error: --index " << o_.index << " out of range for " << file.size() << " samples\n\n" << sub.help();
      return kExitUsage;
    }
    const auto s = file.read(o_.index);
    png::write_depth(o_.out + "_depth.png", to_depth_map(s, file.height(), file.width()));
    png::write_labels(o_.out + "_labels.png", to_label_map(s, file.height(), file.width()));
    out_ << "wrote " << o_.out << "_depth.png and " << o_.out << "_labels.png\n";
    return kExitOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  Options o_;
  Given flags_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(out, err).run(argc, argv);
}

}  // namespace afpseg::cli
