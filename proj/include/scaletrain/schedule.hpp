#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaletrain/error.hpp"

namespace scaletrain {

struct Milestone {
  std::size_t epoch = 1;  // first epoch trained at `rate`
  double rate = 0.01;
  friend bool operator==(const Milestone&, const Milestone&) = default;
};

struct LearningRule {
  double lr = 0;
  double wd = 0;
  friend bool operator==(const LearningRule&, const LearningRule&) = default;
};

/// Epoch-indexed learning rate and weight decay, 1-based epochs.
struct TrainingSchedule {
  std::vector<Milestone> milestones{{1, 0.01}};
  double weight_decay = 0.0;
  std::size_t weight_decay_until = 0;  // decay applies to epochs <= this
  double momentum = 0.9;
  std::size_t total_epochs = 1;
  std::size_t batch_size = 128;
  std::size_t batches_per_epoch = 0;  // 0 = one full pass over the data
  std::size_t eval_every = 1;

  void validate() const {
    if (milestones.empty() || milestones.front().epoch != 1) {
      throw UsageError("schedule needs a milestone at epoch 1");
    }
    for (std::size_t i = 1; i < milestones.size(); ++i) {
      if (milestones[i].epoch <= milestones[i - 1].epoch) throw UsageError("milestone epochs must strictly increase");
      if (milestones[i].rate >= milestones[i - 1].rate) throw UsageError("milestone rates must strictly decrease");
    }
    for (const auto& m : milestones) {
      if (!(m.rate > 0)) throw UsageError("learning rates must be positive");
    }
    if (!(momentum >= 0 && momentum < 1)) throw UsageError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0)) throw UsageError("weight decay must be non-negative");
    if (batch_size == 0) throw UsageError("batch size must be positive");
    if (eval_every != 1) throw UsageError("evaluation cadence must be once per epoch");
  }

  /// Canonical text form; the fingerprint hashes this.
  std::string canonical() const {
    std::string s;
    char buf[64];
    for (const auto& m : milestones) {
      std::snprintf(buf, sizeof buf, "%zu:%.17g;", m.epoch, m.rate);
      s += buf;
    }
    std::snprintf(buf, sizeof buf, "wd=%.17g@%zu;mom=%.17g;", weight_decay, weight_decay_until, momentum);
    s += buf;
    std::snprintf(buf, sizeof buf, "epochs=%zu;batch=%zu;bpe=%zu", total_epochs, batch_size, batches_per_epoch);
    s += buf;
    return s;
  }

  /// FNV-1a 64 of canonical().
  std::uint64_t fingerprint() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  /// Rates lowered after epochs 18, 29, 43 and 52; decay 1e-4 through
  /// epoch 29; halted at 65.
  static TrainingSchedule overfeat() {
    TrainingSchedule s;
    s.milestones = {{1, 1e-2}, {19, 5e-3}, {30, 1e-3}, {44, 5e-4}, {53, 1e-4}};
    s.weight_decay = 1e-4;
    s.weight_decay_until = 29;
    s.momentum = 0.9;
    s.total_epochs = 65;
    s.batch_size = 128;
    s.batches_per_epoch = 10000;
    return s;
  }
};

inline LearningRule rule_for_epoch(const TrainingSchedule& s, std::size_t epoch) {
  double lr = s.milestones.front().rate;
  for (const auto& m : s.milestones) {
    if (m.epoch <= epoch) lr = m.rate;
  }
  return {lr, epoch <= s.weight_decay_until ? s.weight_decay : 0.0};
}

/// Rule in force at `epoch`, 1 <= epoch <= total_epochs.
inline LearningRule lr_at(const TrainingSchedule& s, std::size_t epoch) {
  if (epoch < 1 || epoch > s.total_epochs) {
    throw DomainError("epoch " + std::to_string(epoch) + " outside schedule [1, " +
                      std::to_string(s.total_epochs) + "]");
  }
  return rule_for_epoch(s, epoch);
}

/// First epoch after `epoch` whose rule differs from the one at `epoch`.
inline std::optional<std::size_t> next_rule_change(const TrainingSchedule& s, std::size_t epoch) {
  const auto current = rule_for_epoch(s, epoch);
  for (std::size_t e = epoch + 1; e <= s.total_epochs; ++e) {
    if (!(rule_for_epoch(s, e) == current)) return e;
  }
  return std::nullopt;
}

/// True once the best test accuracy of the last `window` epochs improves on
/// the best before them by less than `epsilon` (absolute).
inline bool plateau_stop(std::span<const double> test_accuracy, std::size_t window, double epsilon) {
  if (window < 2 || test_accuracy.size() <= window) return false;
  const auto split = test_accuracy.end() - static_cast<std::ptrdiff_t>(window);
  const double before = *std::max_element(test_accuracy.begin(), split);
  const double recent = *std::max_element(split, test_accuracy.end());
  return recent - before < epsilon;
}

/// Holds the learning rule after a resize until test accuracy falls below
/// the best seen since the resize, then fires once.
class ExtraTrainController {
 public:
  enum class Mode { Holding, Resumed };

  explicit ExtraTrainController(std::size_t max_hold = 0) : max_hold_(max_hold) {}

  /// Feeds one post-resize evaluation; true exactly when the controller fires.
  bool observe(double test_accuracy) {
    if (mode_ == Mode::Resumed) return false;
    if (best_ && test_accuracy < *best_) {
      mode_ = Mode::Resumed;
      return true;
    }
    best_ = best_ ? std::max(*best_, test_accuracy) : test_accuracy;
    ++epochs_held_;
    if (max_hold_ > 0 && epochs_held_ >= max_hold_) {
      mode_ = Mode::Resumed;
      return true;
    }
    return false;
  }

  Mode mode() const { return mode_; }
  bool holding() const { return mode_ == Mode::Holding; }
  std::size_t epochs_held() const { return epochs_held_; }
  std::optional<double> best() const { return best_; }

 private:
  Mode mode_ = Mode::Holding;
  std::optional<double> best_;
  std::size_t epochs_held_ = 0;
  std::size_t max_hold_;
};

}  // namespace scaletrain
