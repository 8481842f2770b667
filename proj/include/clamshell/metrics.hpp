#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clamshell/cost.hpp"
#include "clamshell/event_log.hpp"

namespace clamshell {

struct BatchStats {
  std::uint32_t index = 0;
  double dispatched_at = 0.0;
  double completed_at = 0.0;
  double makespan = 0.0;
  std::uint32_t tasks = 0;
  std::uint32_t assignments = 0;
  std::uint32_t terminated = 0;
  std::uint32_t duplicates = 0;
  double mpl = 0.0;  // mean per-label latency of finished assignments
  double pool_true_mean = 0.0;
  std::uint32_t replacements = 0;
  double task_latency_sd = 0.0;

  bool operator==(const BatchStats&) const = default;
};

struct LearningPoint {
  double wallclock_s = 0.0;
  std::size_t n_labels = 0;
  double accuracy = 0.0;

  bool operator==(const LearningPoint&) const = default;
};

struct LabelCount {
  double wallclock_s = 0.0;
  std::size_t labels = 0;

  bool operator==(const LabelCount&) const = default;
};

// One row of assignment Gantt data.
struct AssignmentRow {
  std::uint64_t assignment_id = 0;
  std::uint64_t task_id = 0;
  std::uint64_t slot_id = 0;
  std::string worker_id;
  std::uint32_t batch = 0;
  std::uint32_t records = 1;
  std::uint32_t worker_age = 0;
  bool duplicate = false;
  double started_at = 0.0;
  double latency = 0.0;
  double finish_at = 0.0;
  double ended_at = 0.0;
  bool finished = false;

  bool operator==(const AssignmentRow&) const = default;
};

struct RunMetrics {
  std::vector<BatchStats> batches;
  std::vector<double> task_latency;  // completion minus batch dispatch
  std::vector<LabelCount> labels_over_time;
  std::vector<LearningPoint> learning_curve;
  std::vector<AssignmentRow> assignments;
  std::optional<double> first_dispatch;
  double end_time = 0.0;
  double total_latency = 0.0;  // end_time - first_dispatch
  CostLedger cost;
  std::size_t pay_events = 0;
  std::size_t labels = 0;
  std::size_t tasks = 0;
  std::size_t recruits = 0;
  std::size_t audits = 0;

  std::vector<double> makespans() const;
  std::vector<double> mpl_series() const;
  std::vector<double> replacement_series() const;
  std::size_t total_replacements() const;

  bool operator==(const RunMetrics&) const = default;
};

Json to_json(const RunMetrics& metrics);
RunMetrics metrics_from_json(const Json& json);

/// Folds logged facts into RunMetrics. The engine feeds it live; replay feeds
/// it a persisted log, so both paths share one reduction.
class MetricsRecorder {
 public:
  // Throws std::invalid_argument for unknown kinds or malformed payloads.
  void apply(const LogRecord& record);
  const RunMetrics& metrics() const noexcept { return metrics_; }

 private:
  void close_batch(double time);

  RunMetrics metrics_;
  std::vector<double> open_task_latencies_;
  double open_mpl_sum_ = 0.0;
  std::uint32_t open_mpl_n_ = 0;
};

RunMetrics replay(const std::vector<LogRecord>& records);

}  // namespace clamshell
