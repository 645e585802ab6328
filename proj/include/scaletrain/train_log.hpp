#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "scaletrain/error.hpp"

namespace scaletrain {

enum class Phase { Pretrain, Target, ResizedContinue, Extra };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Pretrain: return "pretrain";
    case Phase::Target: return "target";
    case Phase::ResizedContinue: return "resized-continue";
    case Phase::Extra: return "extra";
  }
  return "?";
}

inline Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return Phase::Pretrain;
  if (s == "target") return Phase::Target;
  if (s == "resized-continue") return Phase::ResizedContinue;
  if (s == "extra") return Phase::Extra;
  throw ParseError("unknown phase '" + s + "'");
}

/// One evaluated epoch. Accuracies are percentages; wall_s is cumulative.
struct TrainLogRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::Target;
  double wall_s = 0;
  double train_acc = 0;
  double test_acc = 0;
  double lr = 0;
  double wd = 0;
  friend bool operator==(const TrainLogRecord&, const TrainLogRecord&) = default;
};

using LogSink = std::function<void(const TrainLogRecord&)>;

inline constexpr const char* kLogHeader = "epoch,phase,wall_s,train_acc,test_acc,lr,wd";

/// Six significant digits, shortest form ("0.005", "59.25", "1e-05").
inline std::string format_log_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_log_row(const TrainLogRecord& r) {
  return std::to_string(r.epoch) + ',' + phase_name(r.phase) + ',' + format_log_number(r.wall_s) + ',' +
         format_log_number(r.train_acc) + ',' + format_log_number(r.test_acc) + ',' + format_log_number(r.lr) +
         ',' + format_log_number(r.wd);
}

/// Appends a row, writing the header first when the file is new or empty.
inline void append_log(const TrainLogRecord& record, const std::string& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open log '" + path + "' for append");
  if (fresh) out << kLogHeader << '\n';
  out << format_log_row(record) << '\n';
  if (!out) throw IoError("write failed for log '" + path + "'");
}

inline void write_log(const std::vector<TrainLogRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write log '" + path + "'");
  out << kLogHeader << '\n';
  for (const auto& r : records) out << format_log_row(r) << '\n';
  if (!out) throw IoError("write failed for log '" + path + "'");
}

}  // namespace scaletrain
