// scaletrain: cost analysis, pre-train derivation, training and
// resize-and-continue experiments from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scaletrain/scaletrain.hpp"

namespace st = scaletrain;

namespace {

// Option values collected as text from flags and, optionally, a JSON
// config file. A key given both ways is a usage error.
class Settings {
 public:
  void add(CLI::App* app, const std::string& key, const std::string& help) {
    auto* opt = app->add_option("--" + key, flags_[key], help);
    options_[key] = opt;
  }

  void merge_config(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw st::IoError("cannot open config '" + path + "'");
    st::Json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw st::ParseError(path + ": " + e.what());
    }
    if (!j.is_object()) throw st::ParseError(path + ": config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      auto it = options_.find(key);
      if (it == options_.end()) throw st::UsageError(path + ": unknown config key '" + key + "'");
      if (it->second->count() > 0) {
        throw st::UsageError("'" + key + "' is set by both --" + key + " and config file " + path);
      }
      config_[key] = text_of(value);
    }
  }

  bool has(const std::string& key) const { return !get(key).empty(); }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    if (auto it = options_.find(key); it != options_.end() && it->second->count() > 0) return flags_.at(key);
    if (auto it = config_.find(key); it != config_.end()) return it->second;
    return fallback;
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (v.empty()) throw st::UsageError("missing required setting --" + key);
    return v;
  }

  double real(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v.empty() ? fallback : parse_real(key, v);
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const auto v = get(key);
    return v.empty() ? fallback : parse_count(key, v);
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& f : split(get(key), ',')) out.push_back(parse_count(key, f));
    return out;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw st::UsageError("--" + key + ": '" + v + "' is not a number");
  }

  static std::size_t parse_count(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
      throw st::UsageError("--" + key + ": '" + v + "' is not a non-negative integer");
    }
    return std::stoull(v);
  }

 private:
  static std::string text_of(const st::Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
      std::string s;
      for (const auto& e : v) s += (s.empty() ? "" : ",") + text_of(e);
      return s;
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  std::map<std::string, std::string> flags_;
  std::map<std::string, CLI::Option*> options_;
  std::map<std::string, std::string> config_;
};

void add_schedule_keys(Settings& s, CLI::App* app) {
  s.add(app, "epochs", "total epochs");
  s.add(app, "lr", "milestones as epoch:rate,... (first epoch must be 1)");
  s.add(app, "weight-decay", "weight decay");
  s.add(app, "weight-decay-until", "last epoch with weight decay");
  s.add(app, "momentum", "momentum");
  s.add(app, "batch-size", "mini-batch size");
  s.add(app, "batches-per-epoch", "mini-batches per epoch (0 = one pass)");
  s.add(app, "schedule", "preset schedule: overfeat");
}

void add_data_keys(Settings& s, CLI::App* app) {
  s.add(app, "data", "dataset directory");
  s.add(app, "format", "idx or cifar-binary");
  s.add(app, "train-limit", "use only the first N training records");
  s.add(app, "test-limit", "use only the first N test records");
}

void add_run_keys(Settings& s, CLI::App* app) {
  s.add(app, "seed", "random seed");
  s.add(app, "init", "weight-count or fan-in");
  s.add(app, "max-hold", "cap on extra-mode hold epochs (0 = none)");
  s.add(app, "amplitude", "gain on upscaled weights: square or preserving");
}

st::TrainingSchedule schedule_from(const Settings& s) {
  st::TrainingSchedule sch;
  if (s.has("schedule")) {
    if (s.get("schedule") != "overfeat") throw st::UsageError("unknown schedule preset '" + s.get("schedule") + "'");
    sch = st::TrainingSchedule::overfeat();
  }
  if (s.has("lr")) {
    sch.milestones.clear();
    for (const auto& item : Settings::split(s.get("lr"), ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw st::UsageError("--lr: expected epoch:rate, got '" + item + "'");
      sch.milestones.push_back({Settings::parse_count("lr", item.substr(0, colon)),
                                Settings::parse_real("lr", item.substr(colon + 1))});
    }
  }
  sch.total_epochs = s.count("epochs", sch.total_epochs);
  sch.weight_decay = s.real("weight-decay", sch.weight_decay);
  sch.weight_decay_until = s.count("weight-decay-until", s.has("weight-decay") ? sch.total_epochs : sch.weight_decay_until);
  sch.momentum = s.real("momentum", sch.momentum);
  sch.batch_size = s.count("batch-size", sch.batch_size);
  sch.batches_per_epoch = s.count("batches-per-epoch", sch.batches_per_epoch);
  sch.validate();
  return sch;
}

std::pair<st::Dataset, st::Dataset> data_from(const Settings& s) {
  const auto dir = s.require("data");
  const auto format = st::parse_dataset_format(s.get("format", "cifar-binary"));
  auto train = st::load_dataset(dir, format, st::Split::Train).head(s.count("train-limit", 0));
  auto test = st::load_dataset(dir, format, st::Split::Test).head(s.count("test-limit", 0));
  return {std::move(train), std::move(test)};
}

st::TrainOptions options_from(const Settings& s) {
  st::TrainOptions o;
  o.seed = s.count("seed", 0);
  o.init = st::parse_init_rule(s.get("init", "weight-count"));
  o.max_hold_epochs = s.count("max-hold", o.max_hold_epochs);
  o.amplitude = st::parse_amplitude_rule(s.get("amplitude", "square"));
  return o;
}

st::LogSink log_sink(const std::string& path, bool echo) {
  if (!path.empty()) std::ofstream(path, std::ios::trunc);
  return [path, echo](const st::TrainLogRecord& r) {
    if (!path.empty()) st::append_log(r, path);
    if (echo) {
      std::fprintf(stderr, "%s\n", st::format_log_row(r).c_str());
      std::fflush(stderr);
    }
  };
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw st::IoError("cannot write '" + path + "'");
  out << text;
}

int report_error(st::ErrorKind kind, const std::string& tag, const std::string& message) {
  const char* kinds[] = {"", "usage", "data", "numeric"};
  const st::Json line = {{"error", tag}, {"kind", kinds[static_cast<int>(kind)]}, {"message", message}};
  std::cerr << line.dump() << '\n';
  return static_cast<int>(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-scaling pre-training for CNNs"};
  app.require_subcommand(1);
  std::string config;
  bool quiet = false;

  Settings analyze_s, derive_s, train_s, resize_s, exp_s, synth_s;

  auto* analyze = app.add_subcommand("analyze", "per-layer multiplication counts and predicted speedup (JSON)");
  analyze_s.add(analyze, "arch", "target architecture file");
  analyze_s.add(analyze, "plan", "plan JSON (default: derived)");
  analyze_s.add(analyze, "out", "output path (default: stdout)");

  auto* derive = app.add_subcommand("derive", "derive the pre-train architecture and scale plan");
  derive_s.add(derive, "arch", "target architecture file");
  derive_s.add(derive, "out-arch", "pre-train architecture output");
  derive_s.add(derive, "out-plan", "plan JSON output");

  auto* train = app.add_subcommand("train", "train an architecture from scratch or resume a checkpoint");
  train_s.add(train, "arch", "architecture file");
  train_s.add(train, "resume", "checkpoint to resume from");
  train_s.add(train, "phase", "log phase label: target or pretrain");
  train_s.add(train, "log", "CSV log path");
  train_s.add(train, "checkpoint", "final checkpoint path");
  train_s.add(train, "snapshot-epochs", "epochs to snapshot, comma separated");
  train_s.add(train, "snapshot-prefix", "snapshot path prefix (<prefix>_e<epoch>.ckpt)");
  train_s.add(train, "stop-epoch", "stop after this epoch");
  add_schedule_keys(train_s, train);
  add_data_keys(train_s, train);
  add_run_keys(train_s, train);

  auto* resize = app.add_subcommand("resize-continue", "upscale a pre-train checkpoint and continue training");
  resize_s.add(resize, "arch", "target architecture file");
  resize_s.add(resize, "plan", "plan JSON (default: derived)");
  resize_s.add(resize, "from", "pre-train checkpoint");
  resize_s.add(resize, "mode", "scheduled or extra");
  resize_s.add(resize, "log", "CSV log path");
  resize_s.add(resize, "checkpoint", "final checkpoint path");
  add_schedule_keys(resize_s, resize);
  add_data_keys(resize_s, resize);
  add_run_keys(resize_s, resize);

  auto* exp = app.add_subcommand("experiment", "baseline, pre-train and resize sweep with summary table");
  exp_s.add(exp, "arch", "target architecture file");
  exp_s.add(exp, "plan", "plan JSON (default: derived)");
  exp_s.add(exp, "resize-epochs", "resize epochs, comma separated");
  exp_s.add(exp, "mode", "scheduled or extra");
  exp_s.add(exp, "out", "output directory");
  exp_s.add(exp, "baseline", "run the target baseline: true or false");
  add_schedule_keys(exp_s, exp);
  add_data_keys(exp_s, exp);
  add_run_keys(exp_s, exp);

  auto* synth = app.add_subcommand("synth-data", "write a synthetic ten-class cifar-binary dataset");
  synth_s.add(synth, "out", "output directory");
  synth_s.add(synth, "train", "training records");
  synth_s.add(synth, "test", "test records");
  synth_s.add(synth, "seed", "random seed");

  for (auto* sub : {train, resize, exp}) sub->add_option("--config", config, "JSON file of settings");
  for (auto* sub : {train, resize, exp}) sub->add_flag("--quiet", quiet, "no per-epoch progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(st::ErrorKind::Usage, "usage_error", e.what());
  }

  try {
    if (analyze->parsed()) {
      const auto arch = st::load_architecture(analyze_s.require("arch"));
      const auto report = analyze_s.has("plan") ? st::cost_report(arch, st::load_plan(analyze_s.get("plan")))
                                                : st::cost_report(arch);
      write_text(analyze_s.get("out"), report.dump(2) + "\n");
    } else if (derive->parsed()) {
      const auto arch = st::load_architecture(derive_s.require("arch"));
      const auto d = st::derive_pretrain_architecture(arch);
      write_text(derive_s.get("out-arch"), st::to_text(d.pretrain));
      if (derive_s.has("out-plan")) {
        st::save_plan(d.plan, derive_s.get("out-plan"));
      } else {
        std::cout << st::to_json(d.plan).dump(2) << '\n';
      }
    } else if (train->parsed()) {
      train_s.merge_config(config);
      const auto schedule = schedule_from(train_s);
      auto [train_data, test_data] = data_from(train_s);
      auto o = options_from(train_s);
      o.phase = st::parse_phase(train_s.get("phase", "target"));
      o.snapshot_epochs = train_s.counts("snapshot-epochs");
      o.stop_after_epoch = train_s.count("stop-epoch", 0);
      const auto sink = log_sink(train_s.get("log"), !quiet);
      const auto result = train_s.has("resume")
                              ? st::resume_training(st::load_checkpoint(train_s.get("resume")), schedule, train_data,
                                                    test_data, o, sink)
                              : st::run_training(st::load_architecture(train_s.require("arch")), schedule, train_data,
                                                 test_data, o, sink);
      const auto prefix = train_s.get("snapshot-prefix", "snapshot");
      for (const auto& snap : result.snapshots) {
        st::save_checkpoint(snap, prefix + "_e" + std::to_string(snap.epoch) + ".ckpt");
      }
      if (train_s.has("checkpoint")) st::save_checkpoint(result.final_checkpoint, train_s.get("checkpoint"));
    } else if (resize->parsed()) {
      resize_s.merge_config(config);
      const auto schedule = schedule_from(resize_s);
      const auto target = st::load_architecture(resize_s.require("arch"));
      const auto plan = resize_s.has("plan") ? st::load_plan(resize_s.get("plan"))
                                             : st::derive_pretrain_architecture(target).plan;
      const auto pre = st::load_checkpoint(resize_s.require("from"));
      auto [train_data, test_data] = data_from(resize_s);
      const auto result = st::resize_and_continue(pre, target, plan, schedule,
                                                  st::parse_continue_mode(resize_s.get("mode", "scheduled")),
                                                  train_data, test_data, options_from(resize_s),
                                                  log_sink(resize_s.get("log"), !quiet));
      if (resize_s.has("checkpoint")) st::save_checkpoint(result.final_checkpoint, resize_s.get("checkpoint"));
    } else if (exp->parsed()) {
      exp_s.merge_config(config);
      st::ExperimentConfig cfg;
      cfg.target = st::load_architecture(exp_s.require("arch"));
      if (exp_s.has("plan")) cfg.plan = st::load_plan(exp_s.get("plan"));
      cfg.schedule = schedule_from(exp_s);
      cfg.resize_epochs = exp_s.counts("resize-epochs");
      cfg.mode = st::parse_continue_mode(exp_s.get("mode", "scheduled"));
      const auto o = options_from(exp_s);
      cfg.seed = o.seed;
      cfg.init = o.init;
      cfg.amplitude = o.amplitude;
      cfg.max_hold_epochs = o.max_hold_epochs;
      const auto baseline = exp_s.get("baseline", "true");
      if (baseline != "true" && baseline != "false") throw st::UsageError("--baseline must be true or false");
      cfg.run_baseline = baseline == "true";
      cfg.output_dir = exp_s.require("out");
      auto [train_data, test_data] = data_from(exp_s);
      const st::LogSink progress = quiet ? st::LogSink{} : log_sink("", true);
      const auto result = st::run_experiment(cfg, train_data, test_data, progress);
      std::cout << st::kSummaryHeader << '\n';
      for (const auto& row : result.summary) std::cout << st::format_summary_row(row) << '\n';
    } else if (synth->parsed()) {
      st::SyntheticSpec spec;
      spec.train = synth_s.count("train", spec.train);
      spec.test = synth_s.count("test", spec.test);
      spec.seed = synth_s.count("seed", spec.seed);
      st::write_synthetic_cifar(synth_s.require("out"), spec);
    }
  } catch (const st::Error& e) {
    return report_error(e.kind(), e.tag(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return report_error(st::ErrorKind::Usage, "parse_error", e.what());
  } catch (const std::bad_alloc&) {
    return report_error(st::ErrorKind::Data, "out_of_memory", "allocation failed");
  } catch (const std::exception& e) {
    return report_error(st::ErrorKind::Data, "io_error", e.what());
  }
  return 0;
}
