#include "clamshell/pool.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

namespace clamshell {

void PoolSlot::record_completion(double per_label_latency) {
  ++tasks_completed;
  completed_latency_sum += per_label_latency;
  completed_latency_sum_sq += per_label_latency * per_label_latency;
}

void PoolSlot::record_termination(double terminator_latency) {
  ++tasks_terminated;
  terminator_latency_sum += terminator_latency;
}

double PoolSlot::completed_mean() const {
  if (tasks_completed == 0) throw UndefinedEstimate("no completed tasks");
  return completed_latency_sum / tasks_completed;
}

double PoolSlot::completed_variance() const {
  if (tasks_completed < 2) return 0.0;
  const double n = tasks_completed;
  const double mean = completed_latency_sum / n;
  const double var = (completed_latency_sum_sq - n * mean * mean) / (n - 1.0);
  return std::max(0.0, var);
}

double estimate_latency(const PoolSlot& slot, double alpha) {
  const double n = slot.tasks_started();
  if (n == 0) throw UndefinedEstimate("slot has started no tasks");
  const double nt = slot.tasks_terminated;
  const double nc = slot.tasks_completed;
  if (nt == 0) return slot.completed_mean();
  if (nc + alpha <= 0.0) throw UndefinedEstimate("all tasks terminated and alpha is zero");
  const double l_f = slot.terminator_latency_sum / nt;
  const double l_terminated = l_f * (n + alpha) / (nc + alpha);
  const double l_completed = nc > 0 ? slot.completed_latency_sum / nc : 0.0;
  return nt / n * l_terminated + nc / n * l_completed;
}

double judged_latency(const PoolSlot& slot, const MaintenancePolicy& policy) {
  if (policy.termest) {
    if (slot.tasks_started() == 0) return std::numeric_limits<double>::infinity();
    return estimate_latency(slot, policy.alpha);
  }
  if (slot.tasks_completed == 0) return std::numeric_limits<double>::infinity();
  return slot.completed_mean();
}

bool flag_slow(const PoolSlot& slot, const MaintenancePolicy& policy) {
  const std::uint32_t n = policy.termest ? slot.tasks_started() : slot.tasks_completed;
  if (n < std::max<std::uint32_t>(policy.min_observations, 2)) return false;
  const double mean = judged_latency(slot, policy);
  if (!(mean > policy.threshold)) return false;
  const double var = slot.completed_variance();
  if (var <= 0.0) return true;
  const double t = (mean - policy.threshold) / std::sqrt(var / n);
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double critical = boost::math::quantile(dist, 1.0 - policy.significance_level);
  return t > critical;
}

double predict_convergence(const PopulationSplit& split, std::size_t n) {
  if (!split.mu_s) return split.mu_f.value_or(0.0);
  if (!split.mu_f) return *split.mu_s;
  const double tail = std::pow(split.q, static_cast<double>(n + 1));
  return (1.0 - tail) * *split.mu_f + tail * *split.mu_s;
}

std::vector<double> simulate_idealized_maintenance(const WorkerPopulation& population,
                                                   double threshold, std::size_t pool_size,
                                                   std::size_t steps, Rng& rng) {
  std::vector<double> pool(pool_size);
  for (auto& mu : pool) mu = population.draw(rng).mu;
  std::vector<double> mpl;
  mpl.reserve(steps + 1);
  for (std::size_t step = 0;; ++step) {
    double sum = 0.0;
    for (double mu : pool) sum += mu;
    mpl.push_back(sum / static_cast<double>(pool_size));
    if (step == steps) break;
    for (auto& mu : pool)
      if (mu > threshold) mu = population.draw(rng).mu;
  }
  return mpl;
}

RetainerPool::RetainerPool(std::size_t target_size, MaintenancePolicy policy)
    : target_size_(target_size), policy_(policy) {
  if (target_size_ == 0) throw std::invalid_argument("pool size N_p must be >= 1");
  if (!(policy_.alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(policy_.significance_level > 0.0 && policy_.significance_level < 1.0))
    throw std::invalid_argument("significance_level must lie in (0,1)");
  slots_.reserve(target_size_);
}

std::size_t RetainerPool::watermark() const noexcept {
  return static_cast<std::size_t>(
      std::ceil(policy_.reserve_fraction * static_cast<double>(target_size_) - 1e-9));
}

SlotId RetainerPool::add_slot(WorkerProfile profile, double now) {
  if (slots_.size() >= target_size_) throw std::logic_error("retainer pool is full");
  PoolSlot s;
  s.slot_id = next_slot_id_++;
  s.profile = std::move(profile);
  s.joined_at = now;
  slots_.push_back(std::move(s));
  return slots_.back().slot_id;
}

PoolSlot RetainerPool::remove_slot(SlotId id) {
  auto it = std::find_if(slots_.begin(), slots_.end(),
                         [id](const PoolSlot& s) { return s.slot_id == id; });
  if (it == slots_.end()) throw std::out_of_range("no slot " + std::to_string(id));
  PoolSlot out = std::move(*it);
  slots_.erase(it);
  return out;
}

void RetainerPool::clear_slots() { slots_.clear(); }

PoolSlot& RetainerPool::slot(SlotId id) {
  return const_cast<PoolSlot&>(std::as_const(*this).slot(id));
}

const PoolSlot& RetainerPool::slot(SlotId id) const {
  if (const auto* s = find(id)) return *s;
  throw std::out_of_range("no slot " + std::to_string(id));
}

const PoolSlot* RetainerPool::find(SlotId id) const noexcept {
  for (const auto& s : slots_)
    if (s.slot_id == id) return &s;
  return nullptr;
}

void RetainerPool::push_reserve(WorkerProfile profile) { reserve_.push_back(std::move(profile)); }

void RetainerPool::recruit_to_reserve(const WorkerPopulation& population, std::size_t n, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) reserve_.push_back(population.draw(rng));
}

std::vector<Eviction> RetainerPool::maintenance_step(double now) {
  std::vector<Eviction> out;
  if (!policy_.enabled() || reserve_.empty()) return out;

  struct Candidate {
    std::size_t index;
    double estimate;
  };
  std::vector<Candidate> flagged;
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (flag_slow(slots_[i], policy_)) flagged.push_back({i, judged_latency(slots_[i], policy_)});
  std::stable_sort(flagged.begin(), flagged.end(), [](const Candidate& a, const Candidate& b) {
    return a.estimate > b.estimate;
  });

  for (const auto& c : flagged) {
    if (reserve_.empty()) break;
    Eviction e;
    e.evicted = std::move(slots_[c.index]);
    e.estimate = c.estimate;
    PoolSlot fresh;
    fresh.slot_id = next_slot_id_++;
    fresh.profile = std::move(reserve_.front());
    fresh.joined_at = now;
    reserve_.pop_front();
    e.replacement = fresh.slot_id;
    slots_[c.index] = std::move(fresh);
    out.push_back(std::move(e));
  }
  return out;
}

double RetainerPool::mean_true_mu() const noexcept {
  if (slots_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : slots_) sum += s.profile.mu;
  return sum / static_cast<double>(slots_.size());
}

}  // namespace clamshell
