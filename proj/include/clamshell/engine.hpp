#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clamshell/config.hpp"
#include "clamshell/event_log.hpp"
#include "clamshell/metrics.hpp"

namespace clamshell {

// round(N_p / R), at least 1.
std::size_t batch_ratio_plan(std::size_t pool_size, double ratio);

struct RunResult {
  RunConfig config;
  RunMetrics metrics;
  std::vector<LogRecord> log;
  std::vector<std::string> warnings;
};

/// Runs one configured experiment to completion: batches are posted until the
/// task budget is spent, the dataset runs out, or (with stop_at_target) the
/// accuracy target is met. Deterministic in config.seed. Throws ConfigError
/// for invalid configs and std::logic_error if cost conservation fails.
RunResult run_experiment(const RunConfig& config);

}  // namespace clamshell
