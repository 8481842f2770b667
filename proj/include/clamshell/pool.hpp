#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "clamshell/rng.hpp"
#include "clamshell/worker_model.hpp"

namespace clamshell {

using SlotId = std::uint64_t;

/// One worker's tenure in the retainer pool. Latencies recorded here are per
/// labeled record so that a single threshold applies to every task size.
struct PoolSlot {
  SlotId slot_id = 0;
  WorkerProfile profile;
  double joined_at = 0.0;
  std::uint32_t tasks_completed = 0;   // N_c
  std::uint32_t tasks_terminated = 0;  // N_t
  double completed_latency_sum = 0.0;
  double completed_latency_sum_sq = 0.0;
  double terminator_latency_sum = 0.0;

  // N; a task counts as started once its outcome is known, so N = N_c + N_t.
  std::uint32_t tasks_started() const noexcept { return tasks_completed + tasks_terminated; }

  void record_completion(double per_label_latency);
  // For an assignment overtaken by one that started no earlier;
  // `terminator_latency` is the winner's per-label latency.
  void record_termination(double terminator_latency);

  double completed_mean() const;
  // n-1 denominator; 0 with fewer than two completions.
  double completed_variance() const;
};

struct MaintenancePolicy {
  double threshold = std::numeric_limits<double>::infinity();  // PM_l, seconds per label
  double alpha = 1.0;
  double significance_level = 0.05;
  std::uint32_t min_observations = 3;
  bool termest = true;
  double reserve_fraction = 0.2;

  bool enabled() const noexcept { return threshold < std::numeric_limits<double>::infinity(); }
  bool operator==(const MaintenancePolicy&) const = default;
};

class UndefinedEstimate : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Censoring-corrected mean latency of a slot (TermEst). Terminated tasks are
/// imputed at l_f (N + alpha) / (N_c + alpha), where l_f is the mean latency of
/// the assignments that beat this worker. Returns the plain completed mean
/// when nothing was terminated. Throws UndefinedEstimate when N = 0, or when
/// alpha = 0 and N_c = 0.
double estimate_latency(const PoolSlot& slot, double alpha);

/// One-sided one-sample t-test of H0: mean <= threshold at the policy's
/// significance level. With TermEst the mean is estimate_latency() and the
/// sample size is N; without it, only completed tasks count. The variance is
/// always the completed-task sample variance; with fewer than two completions
/// it is taken as zero. Below min_observations nothing is flagged.
bool flag_slow(const PoolSlot& slot, const MaintenancePolicy& policy);

// Mean latency the slot is judged on, or +inf if it has no usable evidence.
double judged_latency(const PoolSlot& slot, const MaintenancePolicy& policy);

// Expected mean pool latency after n idealized replacement rounds:
// (1 - q^(n+1)) mu_f + q^(n+1) mu_s.
double predict_convergence(const PopulationSplit& split, std::size_t n);

// Pool mean of mu after 0..steps rounds of "evict every mu > threshold,
// redraw from the population". Returns steps + 1 values.
std::vector<double> simulate_idealized_maintenance(const WorkerPopulation& population,
                                                   double threshold, std::size_t pool_size,
                                                   std::size_t steps, Rng& rng);

struct Eviction {
  PoolSlot evicted;
  SlotId replacement = 0;
  double estimate = 0.0;
};

class RetainerPool {
 public:
  RetainerPool(std::size_t target_size, MaintenancePolicy policy);

  std::size_t target_size() const noexcept { return target_size_; }
  const MaintenancePolicy& policy() const noexcept { return policy_; }
  const std::vector<PoolSlot>& slots() const noexcept { return slots_; }
  const std::deque<WorkerProfile>& reserve() const noexcept { return reserve_; }
  std::size_t watermark() const noexcept;

  // Throws std::logic_error when the pool is already at target size.
  SlotId add_slot(WorkerProfile profile, double now);
  // Removes a slot without replacement; returns the removed state.
  PoolSlot remove_slot(SlotId id);
  void clear_slots();

  PoolSlot& slot(SlotId id);
  const PoolSlot& slot(SlotId id) const;
  const PoolSlot* find(SlotId id) const noexcept;

  void push_reserve(WorkerProfile profile);
  // Appends n i.i.d. draws from the population to the reserve.
  void recruit_to_reserve(const WorkerPopulation& population, std::size_t n, Rng& rng);

  /// Evicts flagged slots, slowest estimate first, as long as the reserve
  /// lasts. Each replacement takes over the evicted slot's position.
  std::vector<Eviction> maintenance_step(double now);

  double mean_true_mu() const noexcept;

 private:
  std::size_t target_size_;
  MaintenancePolicy policy_;
  std::vector<PoolSlot> slots_;
  std::deque<WorkerProfile> reserve_;
  SlotId next_slot_id_ = 1;
};

}  // namespace clamshell
