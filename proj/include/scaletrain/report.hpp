#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaletrain/cost_model.hpp"
#include "scaletrain/surgery.hpp"
#include "scaletrain/train_log.hpp"

namespace scaletrain {

using Json = nlohmann::ordered_json;

inline Json to_json(const Padding& p) { return Json::array({p.top, p.left, p.bottom, p.right}); }

inline Padding padding_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("padding must be an array of four integers");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline Json to_json(const InputSpec& in) {
  return {{"channels", in.channels}, {"height", in.height}, {"width", in.width}};
}

inline InputSpec input_from_json(const Json& j) {
  return {j.at("channels").get<std::size_t>(), j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>()};
}

inline Json to_json(const ScalePlan& plan) {
  Json convs = Json::array();
  for (const auto& c : plan.convs) {
    convs.push_back({{"layer", c.layer_index + 1},
                     {"k_target", c.k_target},
                     {"k_pretrain", c.k_pretrain},
                     {"s", c.s()},
                     {"target_pad", to_json(c.target_pad)},
                     {"pretrain_pad", to_json(c.pretrain_pad)}});
  }
  return {{"target_input", to_json(plan.target_input)},
          {"pretrain_input", to_json(plan.pretrain_input)},
          {"convs", convs}};
}

inline ScalePlan plan_from_json(const Json& j) {
  try {
    ScalePlan plan{input_from_json(j.at("target_input")), input_from_json(j.at("pretrain_input")), {}};
    for (const auto& c : j.at("convs")) {
      const auto layer = c.at("layer").get<std::size_t>();
      if (layer == 0) throw ParseError("plan layer numbers start at 1");
      plan.convs.push_back({layer - 1, c.at("k_target").get<std::size_t>(), c.at("k_pretrain").get<std::size_t>(),
                            padding_from_json(c.at("target_pad")), padding_from_json(c.at("pretrain_pad"))});
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed plan: ") + e.what());
  }
}

inline void save_plan(const ScalePlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write plan '" + path + "'");
  out << to_json(plan).dump(2) << '\n';
}

inline ScalePlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return plan_from_json(j);
}

/// Cost report for the derived plan of `target`.
inline Json cost_report(const ArchitectureSpec& target, const ScalePlan& plan) {
  const auto cost = network_cost(target, plan);
  Json layers = Json::array();
  for (const auto& l : cost.layers) {
    const double s2 = l.s * l.s;
    layers.push_back({{"layer", l.layer_index + 1},
                      {"c_in", l.c_in},
                      {"c_out", l.c_out},
                      {"input_side", l.h},
                      {"k_target", l.k_target},
                      {"k_pretrain", l.k_pretrain},
                      {"s", l.s},
                      {"s2", s2},
                      {"s4", s2 * s2},
                      {"mults_target", l.mults_target},
                      {"mults_pretrain", l.mults_pretrain},
                      {"bounds", {{"lower", l.bounds.lower}, {"upper", l.bounds.upper}}},
                      {"realized_mults_target", l.realized_target},
                      {"realized_mults_pretrain", l.realized_pretrain}});
  }
  return {{"network", target.name},
          {"target_input", to_json(plan.target_input)},
          {"pretrain_input", to_json(plan.pretrain_input)},
          {"layers", layers},
          {"totals",
           {{"mults_target", cost.total_target},
            {"mults_pretrain", cost.total_pretrain},
            {"realized_mults_target", cost.realized_total_target},
            {"realized_mults_pretrain", cost.realized_total_pretrain}}},
          {"convolution_multiplication_speedup", cost.speedup()},
          {"realized_convolution_multiplication_speedup", cost.realized_speedup()},
          {"speedup_bounds", {{"s2_aggregate", cost.s2_aggregate_bound}, {"s4_aggregate", cost.s4_aggregate_bound}}}};
}

inline Json cost_report(const ArchitectureSpec& target) {
  return cost_report(target, derive_pretrain_architecture(target).plan);
}

// ---------------------------------------------------------------- summary

struct RunSummary {
  std::string label;  // "Baseline", "Resized at Epoch 17", ...
  double best_accuracy = 0;
  std::size_t best_epoch = 0;
  double final_accuracy = 0;
  double total_seconds = 0;
};

inline RunSummary summarize_run(std::string label, const std::vector<TrainLogRecord>& log, double prior_seconds = 0) {
  RunSummary s{std::move(label), 0, 0, 0, prior_seconds};
  for (const auto& r : log) {
    if (s.best_epoch == 0 || r.test_acc > s.best_accuracy) {
      s.best_accuracy = r.test_acc;
      s.best_epoch = r.epoch;
    }
  }
  if (!log.empty()) {
    s.final_accuracy = log.back().test_acc;
    s.total_seconds = prior_seconds + log.back().wall_s;
  }
  return s;
}

inline constexpr const char* kSummaryHeader = "network,best_test_acc,best_epoch,final_test_acc,total_wall_s";

inline std::string format_summary_row(const RunSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.2f%%,%zu,%.2f%%,%.1f s", s.label.c_str(), s.best_accuracy, s.best_epoch,
                s.final_accuracy, s.total_seconds);
  return buf;
}

inline void write_summary(const std::vector<RunSummary>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write summary '" + path + "'");
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) out << format_summary_row(r) << '\n';
}

}  // namespace scaletrain
