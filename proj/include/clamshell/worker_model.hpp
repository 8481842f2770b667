#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clamshell/rng.hpp"

namespace clamshell {

// Latency samples never fall below this, whatever the configured floor says.
inline constexpr double kMinLatencyFloor = 0.1;

/// Generative model of one crowd worker. Latencies are per labeled record,
/// in seconds; a task grouping N_g records takes N_g times a sampled latency.
struct WorkerProfile {
  std::string worker_id;
  double mu = 1.0;
  double sigma = 0.0;
  double lambda = 1.0;  // probability of returning the correct label

  bool operator==(const WorkerProfile&) const = default;
};

// Throws std::invalid_argument on mu <= 0, sigma < 0, or lambda outside [0,1].
void validate(const WorkerProfile& profile);

class WorkerPopulation {
 public:
  WorkerPopulation(std::vector<WorkerProfile> profiles, std::uint64_t seed = 0);

  const std::vector<WorkerProfile>& profiles() const noexcept { return profiles_; }
  std::size_t size() const noexcept { return profiles_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  double mean_mu() const noexcept;

  // Uniform draw with replacement.
  const WorkerProfile& draw(Rng& rng) const;

 private:
  std::vector<WorkerProfile> profiles_;
  std::uint64_t seed_ = 0;
};

/// Two-class view of a population around a latency threshold. A class that
/// is empty reports no mean.
struct PopulationSplit {
  double threshold = 0.0;
  double q = 0.0;  // mass of workers with mu > threshold
  std::optional<double> mu_f;
  std::optional<double> mu_s;
};

class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t row, const std::string& what)
      : std::runtime_error("trace row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Reads `worker_id,latency_s[,correct]` records. Row numbers in errors are
// 1-based file lines, the header being line 1.
WorkerPopulation load_traces(std::istream& in, std::uint64_t seed = 0);
WorkerPopulation load_traces(const std::filesystem::path& path, std::uint64_t seed = 0);

enum class PopulationFamily { lognormal, normal_mixture, empirical_resample };

struct MixtureComponent {
  double weight = 1.0;
  double mean = 1.0;
  double sd = 0.0;

  bool operator==(const MixtureComponent&) const = default;
};

struct PopulationSpec {
  PopulationFamily family = PopulationFamily::lognormal;
  // lognormal: mu ~ exp(N(log_mean, log_sd^2))
  double log_mean = 4.0943445622221;  // log 60
  double log_sd = 1.0;
  // normal_mixture: mu drawn from a weighted set of normals
  std::vector<MixtureComponent> components;
  // empirical_resample: profiles resampled from a trace file
  std::string trace_path;
  // per-worker latency sd as a fraction of mu (synthetic families only)
  double sigma_ratio = 0.25;
  // lambda ~ U[accuracy_min, accuracy_max]
  double accuracy_min = 1.0;
  double accuracy_max = 1.0;
  std::size_t count = 1000;

  bool operator==(const PopulationSpec&) const = default;
};

// Throws std::invalid_argument for count == 0 or non-positive scales.
WorkerPopulation synthesize_population(const PopulationSpec& spec, std::size_t count,
                                       std::uint64_t seed);
WorkerPopulation synthesize_population(const PopulationSpec& spec, std::size_t count,
                                       std::uint64_t seed,
                                       const std::vector<WorkerProfile>& empirical_base);

struct AssignmentSample {
  double latency = 0.0;
  bool label_correct = true;
};

/// Latency ~ N(mu, sigma^2) clamped at max(kMinLatencyFloor, floor_s); the
/// label is correct with probability lambda. Consumes the latency draw first.
AssignmentSample sample_assignment(const WorkerProfile& profile, Rng& rng,
                                   double floor_s = kMinLatencyFloor);

PopulationSplit split_population(const WorkerPopulation& population, double threshold);

std::string to_string(PopulationFamily family);
PopulationFamily population_family_from_string(const std::string& name);

}  // namespace clamshell
