#include "clamshell/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "clamshell/cost.hpp"
#include "clamshell/dataset.hpp"
#include "clamshell/event_queue.hpp"
#include "clamshell/learning.hpp"
#include "clamshell/pool.hpp"
#include "clamshell/scheduler.hpp"

namespace clamshell {

std::size_t batch_ratio_plan(std::size_t pool_size, double ratio) {
  if (pool_size < 1) throw std::invalid_argument("N_p must be >= 1");
  if (!(ratio > 0.0)) throw std::invalid_argument("R must be > 0");
  const auto b = std::llround(static_cast<double>(pool_size) / ratio);
  return static_cast<std::size_t>(std::max<long long>(b, 1));
}

namespace {

std::string component_name(CostComponent c) {
  switch (c) {
    case CostComponent::wait: return "wait";
    case CostComponent::work: return "work";
    case CostComponent::recruitment: return "recruitment";
  }
  return "work";
}

class Engine final : public SchedulerContext {
 public:
  explicit Engine(const RunConfig& config)
      : config_(config),
        population_(synthesize_population(config.population, config.population.count,
                                          derive_seed(config.seed, stable_hash("population")))),
        pool_(config.N_p, config.maintenance_policy()),
        scheduler_(SchedulerOptions{config.routing, config.SM, config.context_switch_s}),
        recruit_rng_(make_stream(config.seed, stable_hash("recruit"))),
        routing_rng_(make_stream(config.seed, stable_hash("routing"))),
        select_rng_(make_stream(config.seed, stable_hash("select"))),
        learn_rng_(make_stream(config.seed, stable_hash("learn"))),
        batch_size_(batch_ratio_plan(config.N_p, config.R)) {
    if (config.Alg != Algorithm::NL) setup_learning();
  }

  RunResult run();

  // SchedulerContext
  double now() const override { return queue_.now(); }
  void schedule_finish(double at, AssignmentId id) override {
    queue_.schedule(at, EventKind::assignment_finish, id);
  }
  AssignmentSample draw(const PoolSlot& slot, const Task& task, std::uint32_t batch,
                        std::vector<Label>& labels) override {
    Rng rng = make_stream(config_.seed, stable_hash("assign"), stable_hash(slot.profile.worker_id),
                          batch, task.task_id);
    return simulate_answer(slot.profile, task, rng, config_.latency_floor_s, labels);
  }
  Rng& routing_rng() override { return routing_rng_; }
  void assignment_ended(const Assignment& a) override;
  void worker_idle_time(SlotId, double seconds) override {
    if (config_.retainer && seconds > 0.0) pay(IdleTime{seconds});
  }
  void task_completed(const Task& task) override {
    emit("task", Json{{"batch", scheduler_.batch_index()},
                      {"task", task.task_id},
                      {"records", task.records.size()},
                      {"latency", *task.completed_at - batch_posted_at_}});
  }
  void audit(const std::string& message) override { emit("audit", Json{{"message", message}}); }

 private:
  bool learning() const noexcept { return config_.Alg != Algorithm::NL; }
  void setup_learning();
  void emit(const std::string& kind, Json payload);
  void pay(const PayEvent& event);
  WorkerProfile draw_recruit();
  void top_up_reserve();
  void staff_initial_pool();
  std::vector<Task> next_batch_tasks(std::size_t max_tasks);
  void post_batch(std::vector<Task> tasks);
  void absorb_labels();
  template <typename Pred>
  void pump_until(Pred done);
  void handle(const SimEvent& ev);
  void on_maintenance_tick();
  void on_retrain_done();

  const RunConfig& config_;
  WorkerPopulation population_;
  RetainerPool pool_;
  BatchScheduler scheduler_;
  EventQueue queue_;
  Rng recruit_rng_;
  Rng routing_rng_;
  Rng select_rng_;
  Rng learn_rng_;
  std::size_t batch_size_;

  MetricsRecorder recorder_;
  std::vector<LogRecord> log_;
  std::vector<PayEvent> raw_pay_;
  std::vector<std::string> warnings_;

  std::set<std::string> in_use_;
  std::set<std::string> evicted_;
  std::map<std::uint64_t, WorkerProfile> pending_recruits_;
  std::uint64_t next_recruit_ = 0;
  std::vector<WorkerProfile> arriving_pool_;

  std::vector<Task> pending_batch_;
  std::uint32_t batch_index_ = 0;
  double batch_posted_at_ = 0.0;
  bool dispatched_any_ = false;
  bool awaiting_dispatch_ = false;
  std::uint32_t last_dispatched_ = 0;
  bool running_ = true;
  TaskId next_task_id_ = 1;
  PointId next_nl_point_ = 0;

  Dataset data_;
  LearningProblem problem_;
  LearnState learn_;
  std::map<PointId, LabelSource> batch_sources_;
  bool target_reached_ = false;
};

void Engine::setup_learning() {
  if (!config_.dataset_path.empty()) {
    data_ = load_feature_csv(config_.dataset_path);
  } else {
    DatasetParams params = config_.dataset;
    params.seed = config_.dataset_seed.value_or(derive_seed(config_.seed, stable_hash("dataset")));
    data_ = generate_dataset(params);
  }
  Rng split_rng = make_stream(config_.seed, stable_hash("split"));
  HoldoutSplit split = holdout_split(data_.size(), config_.holdout_fraction, split_rng);
  problem_.data = &data_;
  problem_.pool = std::move(split.train);
  problem_.holdout = std::move(split.holdout);
  problem_.train = config_.train;
  problem_.candidate_sample_size = config_.candidate_sample_size;
  const std::size_t p = batch_size_ * config_.N_g;
  if (config_.Alg == Algorithm::HL && config_.active_weighting)
    problem_.active_weight = static_cast<double>(set_active_batch(p, config_.r)) / static_cast<double>(p);
  learn_.model = Classifier(data_.features.cols(), data_.n_classes);
}

void Engine::emit(const std::string& kind, Json payload) {
  LogRecord r{queue_.now(), log_.size(), kind, std::move(payload)};
  recorder_.apply(r);
  log_.push_back(std::move(r));
}

void Engine::pay(const PayEvent& event) {
  const Money amount = price(event, config_.rates);
  raw_pay_.push_back(event);
  emit("pay", Json{{"component", component_name(component_of(event))}, {"micros", amount.micros}});
}

void Engine::assignment_ended(const Assignment& a) {
  const bool finished = a.status == AssignmentStatus::finished;
  emit("assignment", Json{{"id", a.assignment_id},  {"task", a.task_id},
                          {"slot", a.slot_id},      {"worker", a.worker_id},
                          {"batch", a.batch},       {"records", a.records},
                          {"age", a.worker_age},    {"duplicate", a.duplicate},
                          {"started", a.started_at}, {"latency", a.latency},
                          {"finish_at", a.finish_at}, {"ended", a.ended_at},
                          {"status", finished ? "finished" : "terminated"}});
  if (finished) pay(FinishedWork{a.records});
  else pay(TerminatedWork{a.records, a.ended_at - a.started_at, a.finish_at - a.started_at});
}

WorkerProfile Engine::draw_recruit() {
  const std::size_t attempts = 100 * population_.size() + 100;
  for (std::size_t i = 0; i < attempts; ++i) {
    const WorkerProfile& p = population_.draw(recruit_rng_);
    if (in_use_.count(p.worker_id) || evicted_.count(p.worker_id)) continue;
    in_use_.insert(p.worker_id);
    pay(Recruitment{});
    emit("recruit", Json{{"worker", p.worker_id}});
    return p;
  }
  throw std::runtime_error("worker population exhausted; no eligible recruits remain");
}

void Engine::top_up_reserve() {
  if (!pool_.policy().enabled() || !config_.retainer) return;
  const std::size_t have = pool_.reserve().size() + pending_recruits_.size();
  for (std::size_t i = have; i < pool_.watermark(); ++i) {
    const std::uint64_t id = next_recruit_++;
    pending_recruits_.emplace(id, draw_recruit());
    queue_.schedule(queue_.now() + config_.recruitment_lead_s, EventKind::recruitment_ready, id);
  }
}

void Engine::staff_initial_pool() {
  for (std::size_t i = 0; i < config_.N_p; ++i) {
    const SlotId id = pool_.add_slot(draw_recruit(), queue_.now());
    scheduler_.slot_joined(id, queue_.now());
  }
  if (pool_.policy().enabled()) {
    for (std::size_t i = 0; i < pool_.watermark(); ++i) pool_.push_reserve(draw_recruit());
    queue_.schedule(queue_.now() + config_.maintenance_interval_s, EventKind::maintenance_tick);
  }
}

std::vector<Task> Engine::next_batch_tasks(std::size_t max_tasks) {
  const std::size_t n_tasks = std::min(batch_size_, max_tasks);
  const std::uint32_t g = config_.N_g;
  std::vector<PointId> points;
  std::vector<Label> truth;
  int n_classes = 2;
  batch_sources_.clear();

  if (!learning()) {
    for (std::size_t i = 0; i < n_tasks * g; ++i) {
      points.push_back(next_nl_point_++);
      truth.push_back(0);
    }
  } else {
    const std::size_t p_full = batch_size_ * g;
    const std::size_t p = n_tasks * g;
    std::size_t k = 0;
    if (config_.Alg == Algorithm::AL) k = p;
    else if (config_.Alg == Algorithm::HL) k = std::min(p, set_active_batch(p_full, config_.r));
    const bool have_model = learn_.model_version > 0;
    HybridSelection sel = hybrid_select(have_model ? &learn_.model : nullptr, data_.features,
                                        problem_.pool, learn_.labeled, k, p,
                                        config_.candidate_sample_size, select_rng_,
                                        have_model ? &learn_.frontier.ranked : nullptr);
    for (PointId id : sel.active) batch_sources_[id] = LabelSource::active;
    for (PointId id : sel.passive) batch_sources_[id] = LabelSource::passive;
    points = sel.active;
    points.insert(points.end(), sel.passive.begin(), sel.passive.end());
    for (PointId id : points) truth.push_back(data_.labels[id]);
    n_classes = data_.n_classes;
  }

  std::vector<Task> tasks;
  for (std::size_t start = 0; start < points.size(); start += g) {
    Task t;
    t.task_id = next_task_id_++;
    const std::size_t end = std::min(points.size(), start + g);
    t.records.assign(points.begin() + static_cast<std::ptrdiff_t>(start),
                     points.begin() + static_cast<std::ptrdiff_t>(end));
    t.true_labels.assign(truth.begin() + static_cast<std::ptrdiff_t>(start),
                         truth.begin() + static_cast<std::ptrdiff_t>(end));
    t.n_classes = n_classes;
    t.votes_required = config_.votes_required;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void Engine::post_batch(std::vector<Task> tasks) {
  const double now = queue_.now();
  batch_posted_at_ = now;
  if (!config_.retainer) {
    for (const auto& s : pool_.slots()) {
      scheduler_.slot_leaving(s.slot_id, pool_, *this);
      in_use_.erase(s.profile.worker_id);
    }
    pool_.clear_slots();
  } else if (!dispatched_any_) {
    staff_initial_pool();
  }
  emit("dispatch", Json{{"batch", batch_index_},
                        {"tasks", tasks.size()},
                        {"pool_true_mean", config_.retainer ? pool_.mean_true_mu() : 0.0}});
  if (!dispatched_any_ && learning())
    emit("retrain", Json{{"version", 0}, {"n_labels", 0},
                         {"accuracy", holdout_accuracy(learn_.model, problem_)}});
  dispatched_any_ = true;
  last_dispatched_ = batch_index_;

  pending_batch_ = std::move(tasks);
  if (!config_.retainer) {
    arriving_pool_.clear();
    for (std::size_t i = 0; i < config_.N_p; ++i) arriving_pool_.push_back(draw_recruit());
    queue_.schedule(now + config_.recruitment_lead_s, EventKind::batch_dispatch, batch_index_);
  } else {
    queue_.schedule(now, EventKind::batch_dispatch, batch_index_);
  }
  awaiting_dispatch_ = true;
  pump_until([&] { return !awaiting_dispatch_ && scheduler_.batch_complete(); });
}

template <typename Pred>
void Engine::pump_until(Pred done) {
  while (!done()) {
    if (queue_.empty()) throw std::logic_error("simulation stalled with no pending events");
    handle(queue_.pop());
  }
}

void Engine::handle(const SimEvent& ev) {
  switch (ev.kind) {
    case EventKind::assignment_finish:
      scheduler_.on_finish(ev.payload, pool_, *this);
      break;
    case EventKind::recruitment_ready: {
      auto it = pending_recruits_.find(ev.payload);
      if (it == pending_recruits_.end()) break;
      pool_.push_reserve(it->second);
      pending_recruits_.erase(it);
      break;
    }
    case EventKind::retrain_done:
      on_retrain_done();
      break;
    case EventKind::maintenance_tick:
      if (running_) on_maintenance_tick();
      break;
    case EventKind::batch_dispatch:
      if (!config_.retainer) {
        for (auto& profile : arriving_pool_) {
          const SlotId id = pool_.add_slot(std::move(profile), queue_.now());
          scheduler_.slot_joined(id, queue_.now());
        }
        arriving_pool_.clear();
      }
      awaiting_dispatch_ = false;
      scheduler_.begin_batch(std::move(pending_batch_), batch_index_, pool_, *this);
      pending_batch_.clear();
      break;
  }
}

void Engine::on_maintenance_tick() {
  const double now = queue_.now();
  const auto evictions = pool_.maintenance_step(now);
  for (const auto& e : evictions) {
    scheduler_.slot_leaving(e.evicted.slot_id, pool_, *this);
    scheduler_.slot_joined(e.replacement, now);
    in_use_.erase(e.evicted.profile.worker_id);
    evicted_.insert(e.evicted.profile.worker_id);
    emit("replacement", Json{{"batch", last_dispatched_},
                             {"evicted", e.evicted.profile.worker_id},
                             {"replacement", pool_.slot(e.replacement).profile.worker_id},
                             {"estimate", e.estimate}});
  }
  top_up_reserve();
  if (!evictions.empty()) scheduler_.dispatch_idle(pool_, *this);
  queue_.schedule(now + config_.maintenance_interval_s, EventKind::maintenance_tick);
}

void Engine::on_retrain_done() {
  const std::size_t n_labels = learn_.in_flight ? learn_.in_flight->snapshot.size() : 0;
  const auto next = complete_retrain(learn_, problem_, queue_.now(), config_.retrain, learn_rng_);
  if (learn_.model.warning()) warnings_.push_back(*learn_.model.warning());
  const double acc = holdout_accuracy(learn_.model, problem_);
  emit("retrain", Json{{"version", learn_.model_version}, {"n_labels", n_labels}, {"accuracy", acc}});
  if (config_.accuracy_target && acc >= *config_.accuracy_target) target_reached_ = true;
  if (next) queue_.schedule(*next, EventKind::retrain_done, learn_.model_version + 1);
}

void Engine::absorb_labels() {
  std::vector<LabeledPoint> newly;
  for (const auto& t : scheduler_.tasks()) {
    const auto labels = majority_label(t);
    for (std::size_t i = 0; i < t.records.size(); ++i)
      newly.push_back({t.records[i], labels[i], batch_sources_.at(t.records[i])});
  }
  if (const auto done = async_retrain_tick(learn_, newly, queue_.now(), config_.retrain))
    queue_.schedule(*done, EventKind::retrain_done, learn_.model_version + 1);
}

RunResult Engine::run() {
  std::size_t tasks_done = 0;
  while (tasks_done < config_.task_budget) {
    if (config_.stop_at_target && target_reached_) break;
    if (learning()) {
      if (config_.async_retrain)
        pump_until([&] { return queue_.empty() || queue_.next_time() > queue_.now(); });
      else
        pump_until([&] { return !learn_.in_flight.has_value(); });
      if (config_.stop_at_target && target_reached_) break;
    }
    std::vector<Task> tasks = next_batch_tasks(config_.task_budget - tasks_done);
    if (tasks.empty()) {
      warnings_.push_back("no unlabeled points left; stopping early");
      break;
    }
    tasks_done += tasks.size();
    post_batch(std::move(tasks));
    emit("batch_done", Json{{"batch", batch_index_}});
    if (learning()) absorb_labels();
    ++batch_index_;
  }
  running_ = false;
  if (learning()) pump_until([&] { return !learn_.in_flight.has_value(); });
  scheduler_.close_idle(*this);
  emit("run_end", Json::object());

  RunResult result;
  result.config = config_;
  result.metrics = recorder_.metrics();
  result.log = std::move(log_);
  result.warnings = std::move(warnings_);
  if (accrue_costs(raw_pay_, config_.rates) != result.metrics.cost)
    throw std::logic_error("cost ledger does not match the sum of pay events");
  return result;
}

}  // namespace

RunResult run_experiment(const RunConfig& config) {
  validate(config);
  Engine engine(config);
  return engine.run();
}

}  // namespace clamshell
