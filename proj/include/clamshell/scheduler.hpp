#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clamshell/pool.hpp"
#include "clamshell/rng.hpp"
#include "clamshell/worker_model.hpp"

namespace clamshell {

using TaskId = std::uint64_t;
using AssignmentId = std::uint64_t;
using PointId = std::uint64_t;
using Label = int;

enum class TaskState { unassigned, active, complete };

struct Answer {
  std::string worker_id;
  SlotId slot_id = 0;
  AssignmentId assignment_id = 0;
  std::vector<Label> labels;
  double latency = 0.0;
  double received_at = 0.0;
};

/// A labeling task grouping N_g records, complete once it holds
/// `votes_required` answers from distinct workers.
struct Task {
  TaskId task_id = 0;
  std::vector<PointId> records;
  std::vector<Label> true_labels;  // ground truth used to simulate answers
  int n_classes = 2;
  std::uint32_t votes_required = 1;

  TaskState state = TaskState::unassigned;
  std::vector<Answer> answers;
  std::vector<AssignmentId> live;  // running assignments
  std::uint32_t assignments_created = 0;
  std::optional<double> first_start;
  std::optional<double> completed_at;

  std::uint32_t votes_needed() const noexcept {
    const auto have = static_cast<std::uint32_t>(answers.size());
    return have >= votes_required ? 0 : votes_required - have;
  }
  bool answered_by(const std::string& worker_id) const noexcept;
};

enum class AssignmentStatus { running, finished, terminated };

struct Assignment {
  AssignmentId assignment_id = 0;
  TaskId task_id = 0;
  SlotId slot_id = 0;
  std::string worker_id;
  std::uint32_t batch = 0;
  std::uint32_t records = 1;
  std::uint32_t worker_age = 0;  // tasks the worker had completed when this started
  bool duplicate = false;        // issued by straggler mitigation
  double started_at = 0.0;
  double latency = 0.0;          // sampled work time
  double finish_at = 0.0;        // start + pending context switch + latency
  double ended_at = 0.0;
  AssignmentStatus status = AssignmentStatus::running;
  std::vector<Label> labels;
};

enum class RoutingPolicy { random, longest_running, fewest_active, oracle };

std::string to_string(RoutingPolicy policy);
RoutingPolicy routing_policy_from_string(const std::string& name);
std::string to_string(AssignmentStatus status);

struct RouteContext {
  const std::vector<Task>& tasks;
  const std::map<AssignmentId, Assignment>& assignments;
  double now = 0.0;
  bool mitigate = false;
};

/// Picks a task for an available worker, or nothing. Tasks still short of
/// primary assignments win in FIFO order regardless of policy. Otherwise, with
/// mitigation on, an active task is picked by policy. A worker never gets a
/// task it is working on or has already answered. Quality-controlled tasks
/// (votes_required > 1) accept one straggler duplicate at a time.
std::optional<std::size_t> route_available(const std::string& worker_id, const RouteContext& ctx,
                                           RoutingPolicy policy, Rng& rng);

struct QuorumOutcome {
  bool ignored = false;  // completion arrived for a complete task or a repeat worker
  bool completed = false;
  std::vector<AssignmentId> to_terminate;  // live assignments cut at quorum
  std::string audit;
};

// Credits a finished assignment's answer to its task.
QuorumOutcome vote_quorum_step(Task& task, const Answer& answer);

// Per-record plurality; ties go to the label received first. Throws
// std::logic_error unless the task is complete.
std::vector<Label> majority_label(const Task& task);

// Samples one worker's answer to a task: the work time is N_g times one
// latency draw, and each record's label is correct with probability lambda.
AssignmentSample simulate_answer(const WorkerProfile& profile, const Task& task, Rng& rng,
                                 double latency_floor, std::vector<Label>& labels);

/// Services the scheduler needs from whatever drives simulated time.
class SchedulerContext {
 public:
  virtual ~SchedulerContext() = default;
  virtual double now() const = 0;
  virtual void schedule_finish(double at, AssignmentId id) = 0;
  // Latency and labels for this worker on this task.
  virtual AssignmentSample draw(const PoolSlot& slot, const Task& task, std::uint32_t batch,
                                std::vector<Label>& labels) = 0;
  virtual Rng& routing_rng() = 0;
  virtual void assignment_started(const Assignment&) {}
  // Called exactly once per assignment, when it finishes or is terminated.
  virtual void assignment_ended(const Assignment&) {}
  virtual void worker_idle_time(SlotId, double /*seconds*/) {}
  virtual void task_completed(const Task&) {}
  virtual void audit(const std::string&) {}
};

struct SchedulerOptions {
  RoutingPolicy policy = RoutingPolicy::random;
  bool mitigate = false;
  double context_switch_s = 2.0;
};

/// Task lifecycle for one batch at a time over a retainer pool. Worker idle
/// state persists across batches so idle time can be billed.
class BatchScheduler {
 public:
  explicit BatchScheduler(SchedulerOptions options) : options_(options) {}

  const SchedulerOptions& options() const noexcept { return options_; }

  // Throws std::invalid_argument for an empty batch or an empty pool.
  void begin_batch(std::vector<Task> tasks, std::uint32_t batch_index, RetainerPool& pool,
                   SchedulerContext& ctx);
  // Returns false when the assignment is no longer running.
  bool on_finish(AssignmentId id, RetainerPool& pool, SchedulerContext& ctx);

  void slot_joined(SlotId id, double now);
  // Terminates the slot's running assignment (if any) and closes its idle time.
  void slot_leaving(SlotId id, RetainerPool& pool, SchedulerContext& ctx);
  // Bills idle time of every remaining slot up to now.
  void close_idle(SchedulerContext& ctx);

  void dispatch_idle(RetainerPool& pool, SchedulerContext& ctx);

  bool batch_active() const noexcept { return batch_active_; }
  bool batch_complete() const noexcept;
  std::uint32_t batch_index() const noexcept { return batch_index_; }
  const std::vector<Task>& tasks() const noexcept { return tasks_; }
  const std::map<AssignmentId, Assignment>& assignments() const noexcept { return assignments_; }
  std::optional<AssignmentId> current_assignment(SlotId id) const;

 private:
  struct WorkerState {
    std::optional<AssignmentId> current;
    double ready_at = 0.0;
    std::optional<double> idle_since;
  };

  void start_assignment(std::size_t task_index, PoolSlot& slot, SchedulerContext& ctx);
  void terminate(AssignmentId id, double now, SchedulerContext& ctx, bool context_switch);
  std::size_t task_index(TaskId id) const;
  WorkerState& worker(SlotId id);

  SchedulerOptions options_;
  std::vector<Task> tasks_;
  std::map<AssignmentId, Assignment> assignments_;
  std::map<SlotId, WorkerState> workers_;
  std::uint32_t batch_index_ = 0;
  bool batch_active_ = false;
  AssignmentId next_assignment_id_ = 1;
};

struct BatchResult {
  double dispatched_at = 0.0;
  double makespan = 0.0;
  std::vector<double> task_completion;  // seconds after dispatch, task order
  std::vector<Assignment> assignments;
  std::vector<Task> tasks;
  double cost_dollars = 0.0;
};

struct RunBatchOptions {
  SchedulerOptions scheduler;
  std::uint32_t records_per_task = 1;
  double latency_floor = kMinLatencyFloor;
  std::uint64_t seed = 0;
};

/// Runs one batch to completion over a fixed pool on a private clock.
BatchResult run_batch(std::vector<Task> tasks, RetainerPool& pool, const RunBatchOptions& options);

}  // namespace clamshell
