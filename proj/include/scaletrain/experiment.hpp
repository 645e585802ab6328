#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scaletrain/report.hpp"
#include "scaletrain/trainer.hpp"

namespace scaletrain {

struct ExperimentConfig {
  ArchitectureSpec target;
  std::optional<ScalePlan> plan;  // derived from `target` when absent
  TrainingSchedule schedule;
  std::vector<std::size_t> resize_epochs;
  ContinueMode mode = ContinueMode::Scheduled;
  std::uint64_t seed = 0;
  InitRule init = InitRule::WeightCount;
  std::size_t max_hold_epochs = 10;
  AmplitudeRule amplitude = AmplitudeRule::Square;
  bool run_baseline = true;
  std::string output_dir;  // empty: nothing written

  void validate() const {
    schedule.validate();
    if (resize_epochs.empty()) throw UsageError("experiment needs at least one resize epoch");
    for (auto e : resize_epochs) {
      if (e < 1 || e >= schedule.total_epochs) {
        throw UsageError("resize epoch " + std::to_string(e) + " must lie in [1, " +
                         std::to_string(schedule.total_epochs - 1) + "]");
      }
    }
  }
};

struct ResizedRun {
  std::size_t resize_epoch = 0;
  TrainResult result;
};

struct ExperimentResult {
  ArchitectureSpec pretrain;
  ScalePlan plan;
  std::optional<TrainResult> baseline;
  TrainResult pretrain_run;
  std::vector<ResizedRun> resized;
  std::vector<RunSummary> summary;
};

inline std::string resized_label(std::size_t epoch) { return "Resized at Epoch " + std::to_string(epoch); }

/// Baseline target run, one pre-train run with snapshots, then one
/// resize-and-continue run per snapshot epoch.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
                                       const LogSink& progress = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  ExperimentResult out;
  if (cfg.plan) {
    out.plan = *cfg.plan;
    out.pretrain = apply_plan(cfg.target, out.plan);
  } else {
    auto derived = derive_pretrain_architecture(cfg.target);
    out.pretrain = std::move(derived.pretrain);
    out.plan = std::move(derived.plan);
  }
  const bool write = !cfg.output_dir.empty();
  const fs::path dir(cfg.output_dir);
  if (write) {
    fs::create_directories(dir);
    save_architecture(out.pretrain, (dir / "pretrain.arch").string());
    save_plan(out.plan, (dir / "plan.json").string());
  }

  TrainOptions base;
  base.seed = cfg.seed;
  base.init = cfg.init;
  base.max_hold_epochs = cfg.max_hold_epochs;
  base.amplitude = cfg.amplitude;

  if (cfg.run_baseline) {
    TrainOptions o = base;
    o.phase = Phase::Target;
    out.baseline = run_training(cfg.target, cfg.schedule, train, test, o, progress);
    out.summary.push_back(summarize_run("Baseline " + cfg.target.name, out.baseline->log));
    if (write) write_log(out.baseline->log, (dir / "baseline.csv").string());
  }

  TrainOptions pre = base;
  pre.phase = Phase::Pretrain;
  pre.snapshot_epochs = cfg.resize_epochs;
  out.pretrain_run = run_training(out.pretrain, cfg.schedule, train, test, pre, progress);
  out.summary.push_back(summarize_run("Pre-train " + out.pretrain.name, out.pretrain_run.log));
  if (write) write_log(out.pretrain_run.log, (dir / "pretrain.csv").string());

  for (const auto& snapshot : out.pretrain_run.snapshots) {
    const std::size_t e = snapshot.epoch;
    if (write) save_checkpoint(snapshot, (dir / ("pretrain_e" + std::to_string(e) + ".ckpt")).string());
    TrainOptions o = base;
    auto run = resize_and_continue(snapshot, cfg.target, out.plan, cfg.schedule, cfg.mode, train, test, o, progress);
    out.summary.push_back(summarize_run(resized_label(e), run.log));
    if (write) {
      std::vector<TrainLogRecord> curve(out.pretrain_run.log.begin(),
                                        out.pretrain_run.log.begin() + static_cast<std::ptrdiff_t>(e));
      curve.insert(curve.end(), run.log.begin(), run.log.end());
      write_log(curve, (dir / ("resized_e" + std::to_string(e) + ".csv")).string());
    }
    out.resized.push_back({e, std::move(run)});
  }
  if (write) write_summary(out.summary, (dir / "summary.csv").string());
  return out;
}

}  // namespace scaletrain
