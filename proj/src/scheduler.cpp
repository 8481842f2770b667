#include "clamshell/scheduler.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "clamshell/cost.hpp"
#include "clamshell/event_queue.hpp"

namespace clamshell {

bool Task::answered_by(const std::string& worker_id) const noexcept {
  return std::any_of(answers.begin(), answers.end(),
                     [&](const Answer& a) { return a.worker_id == worker_id; });
}

std::string to_string(RoutingPolicy policy) {
  switch (policy) {
    case RoutingPolicy::random: return "random";
    case RoutingPolicy::longest_running: return "longest_running";
    case RoutingPolicy::fewest_active: return "fewest_active";
    case RoutingPolicy::oracle: return "oracle";
  }
  return "unknown";
}

RoutingPolicy routing_policy_from_string(const std::string& name) {
  if (name == "random") return RoutingPolicy::random;
  if (name == "longest_running") return RoutingPolicy::longest_running;
  if (name == "fewest_active") return RoutingPolicy::fewest_active;
  if (name == "oracle") return RoutingPolicy::oracle;
  throw std::invalid_argument("unknown routing policy '" + name + "'");
}

std::string to_string(AssignmentStatus status) {
  switch (status) {
    case AssignmentStatus::running: return "running";
    case AssignmentStatus::finished: return "finished";
    case AssignmentStatus::terminated: return "terminated";
  }
  return "unknown";
}

std::optional<std::size_t> route_available(const std::string& worker_id, const RouteContext& ctx,
                                           RoutingPolicy policy, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < ctx.tasks.size(); ++i) {
    const Task& t = ctx.tasks[i];
    if (t.state == TaskState::complete || t.answered_by(worker_id)) continue;
    const bool working_on_it = std::any_of(t.live.begin(), t.live.end(), [&](AssignmentId id) {
      return ctx.assignments.at(id).worker_id == worker_id;
    });
    if (working_on_it) continue;
    const std::size_t needed = t.votes_needed();
    if (t.live.size() < needed) return i;
    if (!ctx.mitigate) continue;
    if (t.votes_required > 1 && t.live.size() >= needed + 1) continue;
    eligible.push_back(i);
  }
  if (eligible.empty()) return std::nullopt;

  switch (policy) {
    case RoutingPolicy::random:
      return eligible[static_cast<std::size_t>(rng() % eligible.size())];

    case RoutingPolicy::longest_running: {
      std::size_t best = eligible.front();
      double best_age = -1.0;
      for (auto i : eligible) {
        const double age = ctx.now - ctx.tasks[i].first_start.value_or(ctx.now);
        if (age > best_age) {
          best_age = age;
          best = i;
        }
      }
      return best;
    }

    case RoutingPolicy::fewest_active: {
      std::size_t fewest = std::numeric_limits<std::size_t>::max();
      for (auto i : eligible) fewest = std::min(fewest, ctx.tasks[i].live.size());
      std::vector<std::size_t> ties;
      for (auto i : eligible)
        if (ctx.tasks[i].live.size() == fewest) ties.push_back(i);
      return ties[static_cast<std::size_t>(rng() % ties.size())];
    }

    case RoutingPolicy::oracle: {
      std::size_t best = eligible.front();
      double latest = -std::numeric_limits<double>::infinity();
      for (auto i : eligible) {
        double finish = std::numeric_limits<double>::infinity();
        for (auto id : ctx.tasks[i].live) finish = std::min(finish, ctx.assignments.at(id).finish_at);
        if (finish > latest) {
          latest = finish;
          best = i;
        }
      }
      return best;
    }
  }
  return std::nullopt;
}

QuorumOutcome vote_quorum_step(Task& task, const Answer& answer) {
  QuorumOutcome out;
  if (task.state == TaskState::complete) {
    out.ignored = true;
    out.audit = "task " + std::to_string(task.task_id) + " already complete; answer from " +
                answer.worker_id + " ignored";
    return out;
  }
  std::erase(task.live, answer.assignment_id);
  if (task.answered_by(answer.worker_id)) {
    out.ignored = true;
    out.audit = "task " + std::to_string(task.task_id) + " already has a vote from " +
                answer.worker_id;
    return out;
  }
  task.answers.push_back(answer);
  if (task.answers.size() >= task.votes_required) {
    task.state = TaskState::complete;
    task.completed_at = answer.received_at;
    out.completed = true;
    out.to_terminate = std::move(task.live);
    task.live.clear();
  } else {
    task.state = TaskState::active;
  }
  return out;
}

std::vector<Label> majority_label(const Task& task) {
  if (task.state != TaskState::complete || task.answers.empty())
    throw std::logic_error("majority_label on incomplete task " + std::to_string(task.task_id));
  const std::size_t n_records = task.answers.front().labels.size();
  std::vector<Label> out(n_records);
  for (std::size_t r = 0; r < n_records; ++r) {
    // (label, count, first index) in first-seen order
    std::vector<std::pair<Label, int>> tally;
    for (const auto& a : task.answers) {
      const Label l = a.labels.at(r);
      auto it = std::find_if(tally.begin(), tally.end(), [l](const auto& e) { return e.first == l; });
      if (it == tally.end()) tally.emplace_back(l, 1);
      else ++it->second;
    }
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it)
      if (it->second > best->second) best = it;
    out[r] = best->first;
  }
  return out;
}

AssignmentSample simulate_answer(const WorkerProfile& profile, const Task& task, Rng& rng,
                                 double latency_floor, std::vector<Label>& labels) {
  const std::size_t n = std::max<std::size_t>(task.records.size(), 1);
  AssignmentSample s = sample_assignment(profile, rng, latency_floor);
  s.latency *= static_cast<double>(n);
  labels.assign(task.records.size(), 0);
  for (std::size_t r = 0; r < task.records.size(); ++r) {
    const bool correct = r == 0 ? s.label_correct : uniform01(rng) < profile.lambda;
    const Label truth = r < task.true_labels.size() ? task.true_labels[r] : 0;
    if (correct || task.n_classes < 2) {
      labels[r] = truth;
    } else {
      const auto k = static_cast<Label>(rng() % static_cast<std::uint64_t>(task.n_classes - 1));
      labels[r] = k >= truth ? k + 1 : k;
    }
  }
  return s;
}

// --- BatchScheduler ---------------------------------------------------------

BatchScheduler::WorkerState& BatchScheduler::worker(SlotId id) { return workers_[id]; }

std::size_t BatchScheduler::task_index(TaskId id) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    if (tasks_[i].task_id == id) return i;
  throw std::out_of_range("unknown task " + std::to_string(id));
}

std::optional<AssignmentId> BatchScheduler::current_assignment(SlotId id) const {
  auto it = workers_.find(id);
  if (it == workers_.end()) return std::nullopt;
  return it->second.current;
}

bool BatchScheduler::batch_complete() const noexcept {
  return std::all_of(tasks_.begin(), tasks_.end(),
                     [](const Task& t) { return t.state == TaskState::complete; });
}

void BatchScheduler::slot_joined(SlotId id, double now) {
  auto& w = worker(id);
  w.current.reset();
  w.ready_at = now;
  w.idle_since = now;
}

void BatchScheduler::begin_batch(std::vector<Task> tasks, std::uint32_t batch_index,
                                 RetainerPool& pool, SchedulerContext& ctx) {
  if (tasks.empty()) throw std::invalid_argument("batch has no tasks");
  if (pool.slots().empty()) throw std::invalid_argument("retainer pool has no slots");
  const double now = ctx.now();
  tasks_ = std::move(tasks);
  for (auto& t : tasks_) {
    t.state = TaskState::unassigned;
    t.answers.clear();
    t.live.clear();
    t.assignments_created = 0;
    t.first_start.reset();
    t.completed_at.reset();
  }
  assignments_.clear();
  batch_index_ = batch_index;
  batch_active_ = true;
  for (const auto& s : pool.slots()) {
    auto& w = worker(s.slot_id);
    if (!w.idle_since && !w.current) w.idle_since = now;
    // A worker cut off at the end of the previous batch is back on the
    // waiting page by the time new work is posted.
    w.ready_at = now;
  }
  dispatch_idle(pool, ctx);
}

void BatchScheduler::start_assignment(std::size_t index, PoolSlot& slot, SchedulerContext& ctx) {
  const double now = ctx.now();
  Task& task = tasks_[index];
  auto& w = worker(slot.slot_id);
  if (w.idle_since) {
    ctx.worker_idle_time(slot.slot_id, now - *w.idle_since);
    w.idle_since.reset();
  }
  Assignment a;
  a.assignment_id = next_assignment_id_++;
  a.task_id = task.task_id;
  a.slot_id = slot.slot_id;
  a.worker_id = slot.profile.worker_id;
  a.batch = batch_index_;
  a.records = static_cast<std::uint32_t>(std::max<std::size_t>(task.records.size(), 1));
  a.worker_age = slot.tasks_completed;
  a.duplicate = task.live.size() >= task.votes_needed();
  a.started_at = now;
  const AssignmentSample s = ctx.draw(slot, task, batch_index_, a.labels);
  a.latency = s.latency;
  a.finish_at = std::max(now, w.ready_at) + s.latency;

  task.live.push_back(a.assignment_id);
  ++task.assignments_created;
  if (!task.first_start) task.first_start = now;
  task.state = TaskState::active;
  w.current = a.assignment_id;

  const auto id = a.assignment_id;
  const double finish = a.finish_at;
  auto [it, _] = assignments_.emplace(id, std::move(a));
  ctx.assignment_started(it->second);
  ctx.schedule_finish(finish, id);
}

void BatchScheduler::terminate(AssignmentId id, double now, SchedulerContext& ctx,
                               bool context_switch) {
  Assignment& a = assignments_.at(id);
  if (a.status != AssignmentStatus::running) return;
  a.status = AssignmentStatus::terminated;
  a.ended_at = now;
  Task& task = tasks_[task_index(a.task_id)];
  std::erase(task.live, id);
  if (task.state != TaskState::complete)
    task.state = task.live.empty() && task.answers.empty() ? TaskState::unassigned
                                                           : TaskState::active;
  auto& w = worker(a.slot_id);
  w.current.reset();
  w.idle_since = now;
  w.ready_at = context_switch ? now + options_.context_switch_s : now;
  ctx.assignment_ended(a);
}

bool BatchScheduler::on_finish(AssignmentId id, RetainerPool& pool, SchedulerContext& ctx) {
  auto it = assignments_.find(id);
  if (it == assignments_.end() || it->second.status != AssignmentStatus::running) return false;
  const double now = ctx.now();
  Assignment& a = it->second;
  a.status = AssignmentStatus::finished;
  a.ended_at = now;

  PoolSlot& slot = pool.slot(a.slot_id);
  const double per_label = a.latency / a.records;
  slot.record_completion(per_label);
  auto& w = worker(a.slot_id);
  w.current.reset();
  w.idle_since = now;
  w.ready_at = now;
  ctx.assignment_ended(a);

  Task& task = tasks_[task_index(a.task_id)];
  Answer answer{a.worker_id, a.slot_id, a.assignment_id, a.labels, a.latency, now};
  QuorumOutcome outcome = vote_quorum_step(task, answer);
  if (outcome.ignored) ctx.audit(outcome.audit);
  if (outcome.completed) {
    for (auto loser : outcome.to_terminate) {
      const Assignment& l = assignments_.at(loser);
      const SlotId loser_slot = l.slot_id;
      // Only a worker overtaken by a later starter was censored; a duplicate
      // that started after the winner says nothing about its own speed.
      const bool overtaken = l.started_at <= a.started_at;
      terminate(loser, now, ctx, true);
      if (overtaken) pool.slot(loser_slot).record_termination(per_label);
    }
    ctx.task_completed(task);
    if (batch_complete()) batch_active_ = false;
  }
  dispatch_idle(pool, ctx);
  return true;
}

void BatchScheduler::slot_leaving(SlotId id, RetainerPool& pool, SchedulerContext& ctx) {
  auto it = workers_.find(id);
  if (it == workers_.end()) return;
  const double now = ctx.now();
  if (it->second.current) terminate(*it->second.current, now, ctx, false);
  if (it->second.idle_since) ctx.worker_idle_time(id, now - *it->second.idle_since);
  workers_.erase(id);
  (void)pool;
}

void BatchScheduler::close_idle(SchedulerContext& ctx) {
  const double now = ctx.now();
  for (auto& [id, w] : workers_) {
    if (!w.idle_since) continue;
    ctx.worker_idle_time(id, now - *w.idle_since);
    w.idle_since = now;
  }
}

void BatchScheduler::dispatch_idle(RetainerPool& pool, SchedulerContext& ctx) {
  if (!batch_active_) return;
  for (auto& slot : pool.slots()) {
    auto& w = worker(slot.slot_id);
    if (w.current) continue;
    if (!w.idle_since) w.idle_since = ctx.now();
    const RouteContext route{tasks_, assignments_, ctx.now(), options_.mitigate};
    const auto choice = route_available(slot.profile.worker_id, route, options_.policy,
                                        ctx.routing_rng());
    if (choice) start_assignment(*choice, pool.slot(slot.slot_id), ctx);
  }
}

// --- standalone batch -------------------------------------------------------

namespace {

class LocalContext final : public SchedulerContext {
 public:
  LocalContext(const RunBatchOptions& options)
      : options_(options), routing_(make_stream(options.seed, stable_hash("routing"))) {}

  double now() const override { return queue.now(); }
  void schedule_finish(double at, AssignmentId id) override {
    queue.schedule(at, EventKind::assignment_finish, id);
  }
  AssignmentSample draw(const PoolSlot& slot, const Task& task, std::uint32_t batch,
                        std::vector<Label>& labels) override {
    Rng rng = make_stream(options_.seed, stable_hash(slot.profile.worker_id), batch, task.task_id);
    return simulate_answer(slot.profile, task, rng, options_.latency_floor, labels);
  }
  Rng& routing_rng() override { return routing_; }
  void assignment_ended(const Assignment& a) override {
    if (a.status == AssignmentStatus::finished) pay.push_back(FinishedWork{a.records});
    else pay.push_back(TerminatedWork{a.records, a.ended_at - a.started_at, a.finish_at - a.started_at});
  }
  void worker_idle_time(SlotId, double seconds) override { pay.push_back(IdleTime{seconds}); }

  EventQueue queue;
  std::vector<PayEvent> pay;

 private:
  const RunBatchOptions& options_;
  Rng routing_;
};

}  // namespace

BatchResult run_batch(std::vector<Task> tasks, RetainerPool& pool, const RunBatchOptions& options) {
  LocalContext ctx(options);
  BatchScheduler scheduler(options.scheduler);
  for (const auto& s : pool.slots()) scheduler.slot_joined(s.slot_id, 0.0);
  scheduler.begin_batch(std::move(tasks), 0, pool, ctx);
  while (!scheduler.batch_complete()) {
    if (ctx.queue.empty()) throw std::logic_error("batch stalled with no pending events");
    const SimEvent ev = ctx.queue.pop();
    scheduler.on_finish(ev.payload, pool, ctx);
  }
  scheduler.close_idle(ctx);

  BatchResult result;
  result.dispatched_at = 0.0;
  for (const auto& t : scheduler.tasks()) {
    const double done = t.completed_at.value_or(0.0);
    result.task_completion.push_back(done);
    result.makespan = std::max(result.makespan, done);
  }
  for (const auto& [id, a] : scheduler.assignments()) result.assignments.push_back(a);
  result.tasks = scheduler.tasks();
  result.cost_dollars = accrue_costs(ctx.pay, CostRates{}).total().dollars();
  return result;
}

}  // namespace clamshell
