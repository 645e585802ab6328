#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "scaletrain/checkpoint.hpp"
#include "scaletrain/dataset.hpp"
#include "scaletrain/network.hpp"
#include "scaletrain/schedule.hpp"
#include "scaletrain/sgd.hpp"
#include "scaletrain/surgery.hpp"
#include "scaletrain/train_log.hpp"

namespace scaletrain {

struct PlateauRule {
  std::size_t window = 3;
  double epsilon = 0.1;  // percentage points
};

struct TrainOptions {
  std::uint64_t seed = 0;
  Phase phase = Phase::Target;
  std::vector<std::size_t> snapshot_epochs;
  std::optional<PlateauRule> plateau;
  std::size_t stop_after_epoch = 0;  // 0 = run the whole schedule
  std::size_t max_hold_epochs = 10;  // extra-training cap; 0 = unbounded
  ConvAlgorithm conv_algorithm = ConvAlgorithm::Im2col;
  InitRule init = InitRule::WeightCount;
  AmplitudeRule amplitude = AmplitudeRule::Square;  // used by resize_and_continue
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<Checkpoint> snapshots;
  std::vector<TrainLogRecord> log;
};

enum class ContinueMode { Scheduled, Extra };

inline ContinueMode parse_continue_mode(const std::string& s) {
  if (s == "scheduled") return ContinueMode::Scheduled;
  if (s == "extra") return ContinueMode::Extra;
  throw UsageError("unknown mode '" + s + "' (expected scheduled or extra)");
}

/// Dataset brought to a network's input resolution and normalization.
inline Dataset prepare_dataset(const Dataset& data, const ArchitectureSpec& arch) {
  data.validate();
  if (data.images.dim(1) != arch.input.channels) {
    throw ArchitectureMismatchError("dataset has " + std::to_string(data.images.dim(1)) +
                                    " channels, architecture expects " + std::to_string(arch.input.channels));
  }
  Dataset out{data.images, data.labels, data.split, data.classes};
  if (data.images.dim(2) != arch.input.height || data.images.dim(3) != arch.input.width) {
    if (data.images.dim(2) < arch.input.height || data.images.dim(3) < arch.input.width) {
      throw ArchitectureMismatchError("dataset images " + std::to_string(data.images.dim(2)) + "x" +
                                      std::to_string(data.images.dim(3)) + " are smaller than network input");
    }
    out.images = downscale_image(data.images, arch.input.height, arch.input.width);
  }
  if (!arch.channel_mean.empty()) {
    const std::size_t plane = arch.input.height * arch.input.width;
    for (std::size_t n = 0; n < out.size(); ++n) {
      for (std::size_t c = 0; c < arch.input.channels; ++c) {
        float* p = out.images.raw() + (n * arch.input.channels + c) * plane;
        const auto m = static_cast<float>(arch.channel_mean[c]);
        for (std::size_t i = 0; i < plane; ++i) p[i] -= m;
      }
    }
  }
  return out;
}

namespace detail {

inline void gather_batch(const Dataset& data, std::span<const std::size_t> indices, Tensor<float>& images,
                         std::vector<int>& labels) {
  const std::size_t per = data.images.size() / data.size();
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  if (images.shape() != shape) images = Tensor<float>(shape);
  labels.resize(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    std::copy_n(data.images.raw() + indices[b] * per, per, images.raw() + b * per);
    labels[b] = data.labels[indices[b]];
  }
}

}  // namespace detail

/// Top-1 accuracy in percent.
inline double evaluate_accuracy(const Network<float>& net, const Dataset& data, std::size_t batch = 256,
                                ConvAlgorithm algorithm = ConvAlgorithm::Im2col) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Tensor<float> images;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const std::size_t n = std::min(batch, data.size() - start);
    detail::gather_batch(data, std::span(idx).subspan(start, n), images, labels);
    const auto logits = net.forward(images, nullptr, algorithm);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const float* z = logits.raw() + i * k;
      if (static_cast<int>(std::max_element(z, z + k) - z) == labels[i]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Mutable training state: everything a checkpoint captures.
class TrainingSession {
 public:
  TrainingSession(Network<float> net, std::vector<Tensor<float>> velocity, Rng rng, std::size_t epoch,
                  double wall_seconds, const TrainingSchedule& schedule)
      : net_(std::move(net)), rng_(std::move(rng)), epoch_(epoch), wall_(wall_seconds), schedule_(schedule) {
    schedule_.validate();
    if (velocity.empty()) {
      for (const auto* p : net_.parameters()) velocity.emplace_back(p->shape());
    }
    sgd_.velocity = std::move(velocity);
    sgd_.momentum = schedule_.momentum;
  }

  static TrainingSession fresh(const ArchitectureSpec& arch, const TrainingSchedule& schedule, std::uint64_t seed,
                               InitRule init = InitRule::WeightCount) {
    Rng rng(seed);
    auto net = Network<float>::initialized(arch, rng, init);
    return TrainingSession(std::move(net), {}, std::move(rng), 0, 0.0, schedule);
  }

  static TrainingSession from_checkpoint(const Checkpoint& ck, const TrainingSchedule& schedule) {
    if (ck.schedule_fingerprint != schedule.fingerprint()) {
      throw UsageError("checkpoint was written under a different training schedule");
    }
    auto net = network_from_checkpoint(ck);
    auto velocity = velocity_from_checkpoint(ck, net);
    Rng rng;
    rng.restore(ck.rng_state);
    return TrainingSession(std::move(net), std::move(velocity), std::move(rng), ck.epoch, ck.wall_seconds, schedule);
  }

  /// Trains one epoch under `rule`, evaluates, and returns the log record.
  TrainLogRecord run_epoch(const Dataset& train, const Dataset& test, const LearningRule& rule, Phase phase,
                           ConvAlgorithm algorithm = ConvAlgorithm::Im2col) {
    const auto start = std::chrono::steady_clock::now();
    sgd_.learning_rate = rule.lr;
    sgd_.weight_decay = rule.wd;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), rng_);
    const std::size_t bs = schedule_.batch_size;
    std::size_t batches = (train.size() + bs - 1) / bs;
    if (schedule_.batches_per_epoch > 0) batches = std::min(batches, schedule_.batches_per_epoch);

    Tensor<float> images;
    std::vector<int> labels;
    typename Network<float>::Cache cache;
    std::size_t seen = 0, correct = 0;
    auto params = net_.parameters();
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t first = b * bs;
      const std::size_t n = std::min(bs, train.size() - first);
      detail::gather_batch(train, std::span(order).subspan(first, n), images, labels);
      const auto logits = net_.forward(images, &cache, algorithm);
      const auto xent = softmax_xent_forward<float>(logits, labels);
      if (!std::isfinite(xent.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch_ + 1) + ", batch " +
                           std::to_string(b + 1));
      }
      const auto grads = net_.backward(cache, softmax_xent_backward<float>(xent.probabilities, labels));
      std::vector<const Tensor<float>*> grad_ptrs;
      for (const auto& g : grads) grad_ptrs.push_back(&g);
      sgd_step(params, grad_ptrs, sgd_);
      seen += n;
      correct += xent.correct;
    }
    ++epoch_;
    const double test_acc = evaluate_accuracy(net_, test, 256, algorithm);
    wall_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double train_acc = seen ? 100.0 * static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    return {epoch_, phase, wall_, train_acc, test_acc, rule.lr, rule.wd};
  }

  /// Adds time spent outside run_epoch (data preparation, surgery).
  void charge(double seconds) { wall_ += seconds; }

  Checkpoint checkpoint() const {
    return make_checkpoint(net_, sgd_.velocity, epoch_, rng_, schedule_.fingerprint(), wall_);
  }

  const Network<float>& network() const { return net_; }
  std::size_t epoch() const { return epoch_; }
  double wall_seconds() const { return wall_; }
  const TrainingSchedule& schedule() const { return schedule_; }

 private:
  Network<float> net_;
  SgdState<float> sgd_;
  Rng rng_;
  std::size_t epoch_;
  double wall_;
  TrainingSchedule schedule_;
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

inline TrainResult run_scheduled(TrainingSession& session, const Dataset& train, const Dataset& test,
                                 const TrainOptions& options, Phase phase, const LogSink& sink) {
  TrainResult result;
  const auto& schedule = session.schedule();
  std::size_t last = schedule.total_epochs;
  if (options.stop_after_epoch > 0) last = std::min(last, options.stop_after_epoch);
  std::vector<double> accuracies;
  while (session.epoch() < last) {
    const auto record =
        session.run_epoch(train, test, lr_at(schedule, session.epoch() + 1), phase, options.conv_algorithm);
    result.log.push_back(record);
    accuracies.push_back(record.test_acc);
    if (sink) sink(record);
    if (contains(options.snapshot_epochs, session.epoch())) result.snapshots.push_back(session.checkpoint());
    if (options.plateau && plateau_stop(accuracies, options.plateau->window, options.plateau->epsilon)) break;
  }
  result.final_checkpoint = session.checkpoint();
  return result;
}

}  // namespace detail

/// Trains `arch` from a seeded uniform initialization.
inline TrainResult run_training(const ArchitectureSpec& arch, const TrainingSchedule& schedule, const Dataset& train,
                                const Dataset& test, const TrainOptions& options, const LogSink& sink = {}) {
  detail::Stopwatch watch;
  auto session = TrainingSession::fresh(arch, schedule, options.seed, options.init);
  const auto train_data = prepare_dataset(train, arch);
  const auto test_data = prepare_dataset(test, arch);
  session.charge(watch.lap());
  return detail::run_scheduled(session, train_data, test_data, options, options.phase, sink);
}

/// Continues from a checkpoint of the same architecture and schedule.
inline TrainResult resume_training(const Checkpoint& ck, const TrainingSchedule& schedule, const Dataset& train,
                                   const Dataset& test, const TrainOptions& options, const LogSink& sink = {}) {
  detail::Stopwatch watch;
  auto session = TrainingSession::from_checkpoint(ck, schedule);
  const auto train_data = prepare_dataset(train, ck.arch);
  const auto test_data = prepare_dataset(test, ck.arch);
  session.charge(watch.lap());
  return detail::run_scheduled(session, train_data, test_data, options, options.phase, sink);
}

/// Upscales a pre-train checkpoint onto `target` and keeps training.
/// Scheduled: epochs e+1.. follow lr_at as if never paused. Extra: the rule
/// of epoch e is held until test accuracy drops below the best since the
/// resize; the schedule then resumes at its next rule change, shifted by
/// the epochs spent holding, and the horizon extends by the same shift.
/// A run still holding at the last scheduled epoch ends there.
inline TrainResult resize_and_continue(const Checkpoint& pretrain_ckpt, const ArchitectureSpec& target,
                                       const ScalePlan& plan, const TrainingSchedule& schedule, ContinueMode mode,
                                       const Dataset& train, const Dataset& test, const TrainOptions& options,
                                       const LogSink& sink = {}) {
  if (pretrain_ckpt.epoch >= schedule.total_epochs) {
    throw UsageError("resize epoch " + std::to_string(pretrain_ckpt.epoch) + " is not before the schedule's last epoch " +
                     std::to_string(schedule.total_epochs));
  }
  detail::Stopwatch watch;
  const auto resized = resize_checkpoint(pretrain_ckpt, target, plan, options.amplitude);
  auto session = TrainingSession::from_checkpoint(resized, schedule);
  const auto train_data = prepare_dataset(train, target);
  const auto test_data = prepare_dataset(test, target);
  session.charge(watch.lap());

  if (mode == ContinueMode::Scheduled) {
    return detail::run_scheduled(session, train_data, test_data, options, Phase::ResizedContinue, sink);
  }

  TrainResult result;
  const std::size_t resize_epoch = pretrain_ckpt.epoch;
  const LearningRule held = rule_for_epoch(schedule, std::max<std::size_t>(resize_epoch, 1));
  const auto change = next_rule_change(schedule, std::max<std::size_t>(resize_epoch, 1));
  ExtraTrainController controller(options.max_hold_epochs);
  std::size_t shift = 0;
  std::size_t horizon = schedule.total_epochs;
  while (session.epoch() < horizon) {
    const std::size_t epoch = session.epoch() + 1;
    const bool holding = controller.holding();
    const LearningRule rule = holding ? held : rule_for_epoch(schedule, epoch - shift);
    const auto record = session.run_epoch(train_data, test_data, rule, holding ? Phase::Extra : Phase::ResizedContinue,
                                          options.conv_algorithm);
    result.log.push_back(record);
    if (sink) sink(record);
    if (detail::contains(options.snapshot_epochs, epoch)) result.snapshots.push_back(session.checkpoint());
    if (holding && controller.observe(record.test_acc)) {
      if (change && epoch + 1 > *change) shift = epoch + 1 - *change;
      horizon = std::max(schedule.total_epochs + shift, epoch);
    }
  }
  result.final_checkpoint = session.checkpoint();
  return result;
}

}  // namespace scaletrain
