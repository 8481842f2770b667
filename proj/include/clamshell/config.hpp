#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "clamshell/classifier.hpp"
#include "clamshell/cost.hpp"
#include "clamshell/dataset.hpp"
#include "clamshell/event_log.hpp"
#include "clamshell/learning.hpp"
#include "clamshell/scheduler.hpp"
#include "clamshell/worker_model.hpp"

namespace clamshell {

enum class Algorithm { AL, PL, HL, NL };

std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);

/// Complete description of one experiment. The pool, batch, maintenance,
/// mitigation and learning keys are named PM_l, SM, N_p, N_g, R and Alg.
struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;

  PopulationSpec population;

  std::size_t N_p = 15;
  std::uint32_t N_g = 5;
  double R = 1.0;
  double PM_l = std::numeric_limits<double>::infinity();
  bool SM = false;
  Algorithm Alg = Algorithm::NL;

  std::uint32_t votes_required = 1;
  RoutingPolicy routing = RoutingPolicy::random;
  double context_switch_s = 2.0;
  double latency_floor_s = kMinLatencyFloor;
  bool retainer = true;
  double recruitment_lead_s = 180.0;
  std::size_t task_budget = 100;
  std::optional<double> accuracy_target;
  bool stop_at_target = false;
  double beta = 0.5;

  // maintenance
  double alpha = 1.0;
  double significance_level = 0.05;
  std::uint32_t min_observations = 3;
  bool termest = true;
  double reserve_fraction = 0.2;
  double maintenance_interval_s = 10.0;

  // learning
  double r = 0.5;
  bool active_weighting = true;
  bool async_retrain = true;
  RetrainOptions retrain;
  std::size_t candidate_sample_size = 1000;
  TrainOptions train;
  double holdout_fraction = 0.2;
  DatasetParams dataset;
  std::optional<std::uint64_t> dataset_seed;  // derived from seed when absent
  std::string dataset_path;

  CostRates rates;

  MaintenancePolicy maintenance_policy() const;
  bool operator==(const RunConfig&) const = default;
};

/// Invalid configuration; `path()` locates the field, e.g. "maintenance.alpha".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

Json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const Json& json);
RunConfig load_config(const std::filesystem::path& path);

void validate(const RunConfig& config);

// Sets a (dotted) key to a JSON value and re-validates.
RunConfig with_override(const RunConfig& config, const std::string& key, const Json& value);
// Text from the command line: JSON if it parses, else a string.
Json parse_override_value(const std::string& text);

// "base-nr", "base-r" or "clamshell" applied on top of `config`.
RunConfig apply_preset(RunConfig config, const std::string& preset);

}  // namespace clamshell
