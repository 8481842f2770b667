#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clamshell/config.hpp"
#include "clamshell/engine.hpp"
#include "clamshell/metrics.hpp"

namespace clamshell {

struct SweepAxis {
  std::string key;  // config key, dotted for nested fields
  std::vector<Json> values;
};

struct SweepSpec {
  RunConfig base;
  std::vector<SweepAxis> axes;
  std::size_t replicates = 1;
};

using Setting = std::pair<std::string, Json>;

struct CellPlan {
  std::size_t cell_index = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::vector<Setting> settings;
};

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t cell_index, std::size_t replicate);

// Cartesian product of the axes (last axis fastest) times replicates.
std::vector<CellPlan> expand(const SweepSpec& spec);
std::size_t cell_count(const SweepSpec& spec);

// Throws ConfigError if a setting does not apply to the base config.
RunConfig cell_config(const SweepSpec& spec, const CellPlan& plan);

struct ReplicateOutcome {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::optional<RunMetrics> metrics;
  std::string error;
};

struct CellRuns {
  std::size_t cell_index = 0;
  std::vector<Setting> settings;
  std::vector<ReplicateOutcome> runs;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
};

Summary summarize(std::vector<double> values);

struct CellAggregate {
  std::size_t cell_index = 0;
  std::vector<Setting> settings;
  std::size_t succeeded = 0;
  std::vector<std::string> failures;
  Summary makespan;           // pooled over every batch of every replicate
  Summary makespan_sd;        // per-run standard deviation of batch makespans
  Summary total_latency;
  Summary cost;
  Summary replacements;       // per-run totals
  Summary throughput;         // labels per second
  std::vector<double> mpl_by_batch;           // mean across replicates
  std::vector<double> replacements_by_batch;  // mean across replicates
  std::vector<std::vector<LearningPoint>> learning_curves;
};

struct SweepReport {
  std::vector<std::string> axis_keys;
  std::vector<CellAggregate> cells;
};

// Pure fold over completed cells.
SweepReport aggregate(const std::vector<std::string>& axis_keys, const std::vector<CellRuns>& cells);

/// Runs every cell; a failing run is recorded in its cell and the sweep goes
/// on. `on_run` sees each finished run (for persisting logs).
SweepReport run_sweep(const SweepSpec& spec,
                      const std::function<void(const CellPlan&, const RunResult&)>& on_run = {},
                      std::vector<CellRuns>* raw = nullptr);

Json to_json(const SweepReport& report);
Json to_json(const SweepSpec& spec);
// {"base": {...config...}, "preset": optional, "axes": {key: [values]}, "replicates": n}
SweepSpec sweep_from_json(const Json& json);

}  // namespace clamshell
