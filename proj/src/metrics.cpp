#include "clamshell/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace clamshell {

std::vector<double> RunMetrics::makespans() const {
  std::vector<double> v;
  for (const auto& b : batches) v.push_back(b.makespan);
  return v;
}

std::vector<double> RunMetrics::mpl_series() const {
  std::vector<double> v;
  for (const auto& b : batches) v.push_back(b.mpl);
  return v;
}

std::vector<double> RunMetrics::replacement_series() const {
  std::vector<double> v;
  for (const auto& b : batches) v.push_back(b.replacements);
  return v;
}

std::size_t RunMetrics::total_replacements() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.replacements;
  return n;
}

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Json row_json(const AssignmentRow& a) {
  return Json{{"id", a.assignment_id}, {"task", a.task_id},      {"slot", a.slot_id},
              {"worker", a.worker_id}, {"batch", a.batch},        {"records", a.records},
              {"age", a.worker_age},   {"duplicate", a.duplicate}, {"started", a.started_at},
              {"latency", a.latency},  {"finish_at", a.finish_at}, {"ended", a.ended_at},
              {"status", a.finished ? "finished" : "terminated"}};
}

AssignmentRow row_from_json(const Json& j) {
  AssignmentRow a;
  a.assignment_id = j.at("id").get<std::uint64_t>();
  a.task_id = j.at("task").get<std::uint64_t>();
  a.slot_id = j.at("slot").get<std::uint64_t>();
  a.worker_id = j.at("worker").get<std::string>();
  a.batch = j.at("batch").get<std::uint32_t>();
  a.records = j.at("records").get<std::uint32_t>();
  a.worker_age = j.at("age").get<std::uint32_t>();
  a.duplicate = j.at("duplicate").get<bool>();
  a.started_at = j.at("started").get<double>();
  a.latency = j.at("latency").get<double>();
  a.finish_at = j.at("finish_at").get<double>();
  a.ended_at = j.at("ended").get<double>();
  a.finished = j.at("status").get<std::string>() == "finished";
  return a;
}

CostComponent component_from_string(const std::string& s) {
  if (s == "wait") return CostComponent::wait;
  if (s == "work") return CostComponent::work;
  if (s == "recruitment") return CostComponent::recruitment;
  throw std::invalid_argument("unknown cost component '" + s + "'");
}

}  // namespace

Json to_json(const RunMetrics& m) {
  Json batches = Json::array();
  for (const auto& b : m.batches)
    batches.push_back(Json{{"index", b.index},
                           {"dispatched_at", b.dispatched_at},
                           {"completed_at", b.completed_at},
                           {"makespan", b.makespan},
                           {"tasks", b.tasks},
                           {"assignments", b.assignments},
                           {"terminated", b.terminated},
                           {"duplicates", b.duplicates},
                           {"mpl", b.mpl},
                           {"pool_true_mean", b.pool_true_mean},
                           {"replacements", b.replacements},
                           {"task_latency_sd", b.task_latency_sd}});
  Json labels = Json::array();
  for (const auto& l : m.labels_over_time) labels.push_back(Json::array({l.wallclock_s, l.labels}));
  Json curve = Json::array();
  for (const auto& p : m.learning_curve)
    curve.push_back(Json{{"wallclock_s", p.wallclock_s}, {"n_labels", p.n_labels}, {"accuracy", p.accuracy}});
  Json rows = Json::array();
  for (const auto& a : m.assignments) rows.push_back(row_json(a));

  Json j;
  j["batches"] = std::move(batches);
  j["task_latency"] = m.task_latency;
  j["labels_over_time"] = std::move(labels);
  j["learning_curve"] = std::move(curve);
  j["assignments"] = std::move(rows);
  j["first_dispatch"] = m.first_dispatch ? Json(*m.first_dispatch) : Json(nullptr);
  j["end_time"] = m.end_time;
  j["total_latency_s"] = m.total_latency;
  j["cost"] = Json{{"wait_micros", m.cost.wait.micros},
                   {"work_micros", m.cost.work.micros},
                   {"recruitment_micros", m.cost.recruitment.micros},
                   {"total_dollars", m.cost.total().dollars()}};
  j["pay_events"] = m.pay_events;
  j["labels"] = m.labels;
  j["tasks"] = m.tasks;
  j["recruits"] = m.recruits;
  j["audits"] = m.audits;
  return j;
}

RunMetrics metrics_from_json(const Json& j) {
  RunMetrics m;
  for (const auto& b : j.at("batches")) {
    BatchStats s;
    s.index = b.at("index").get<std::uint32_t>();
    s.dispatched_at = b.at("dispatched_at").get<double>();
    s.completed_at = b.at("completed_at").get<double>();
    s.makespan = b.at("makespan").get<double>();
    s.tasks = b.at("tasks").get<std::uint32_t>();
    s.assignments = b.at("assignments").get<std::uint32_t>();
    s.terminated = b.at("terminated").get<std::uint32_t>();
    s.duplicates = b.at("duplicates").get<std::uint32_t>();
    s.mpl = b.at("mpl").is_null() ? std::nan("") : b.at("mpl").get<double>();
    s.pool_true_mean = b.at("pool_true_mean").get<double>();
    s.replacements = b.at("replacements").get<std::uint32_t>();
    s.task_latency_sd = b.at("task_latency_sd").get<double>();
    m.batches.push_back(s);
  }
  m.task_latency = j.at("task_latency").get<std::vector<double>>();
  for (const auto& l : j.at("labels_over_time"))
    m.labels_over_time.push_back({l.at(0).get<double>(), l.at(1).get<std::size_t>()});
  for (const auto& p : j.at("learning_curve"))
    m.learning_curve.push_back({p.at("wallclock_s").get<double>(), p.at("n_labels").get<std::size_t>(),
                                p.at("accuracy").get<double>()});
  for (const auto& a : j.at("assignments")) m.assignments.push_back(row_from_json(a));
  if (!j.at("first_dispatch").is_null()) m.first_dispatch = j.at("first_dispatch").get<double>();
  m.end_time = j.at("end_time").get<double>();
  m.total_latency = j.at("total_latency_s").get<double>();
  const auto& c = j.at("cost");
  m.cost.wait.micros = c.at("wait_micros").get<std::int64_t>();
  m.cost.work.micros = c.at("work_micros").get<std::int64_t>();
  m.cost.recruitment.micros = c.at("recruitment_micros").get<std::int64_t>();
  m.pay_events = j.at("pay_events").get<std::size_t>();
  m.labels = j.at("labels").get<std::size_t>();
  m.tasks = j.at("tasks").get<std::size_t>();
  m.recruits = j.at("recruits").get<std::size_t>();
  m.audits = j.at("audits").get<std::size_t>();
  return m;
}

void MetricsRecorder::close_batch(double time) {
  if (metrics_.batches.empty()) return;
  BatchStats& b = metrics_.batches.back();
  b.completed_at = time;
  b.makespan = time - b.dispatched_at;
  b.mpl = open_mpl_n_ ? open_mpl_sum_ / open_mpl_n_ : std::nan("");
  b.task_latency_sd = sample_sd(open_task_latencies_);
}

void MetricsRecorder::apply(const LogRecord& r) {
  const Json& p = r.payload;
  auto& m = metrics_;
  try {
    if (r.kind == "dispatch") {
      BatchStats b;
      b.index = p.at("batch").get<std::uint32_t>();
      b.dispatched_at = r.time;
      b.tasks = p.at("tasks").get<std::uint32_t>();
      b.pool_true_mean = p.at("pool_true_mean").get<double>();
      m.batches.push_back(b);
      if (!m.first_dispatch) m.first_dispatch = r.time;
      open_task_latencies_.clear();
      open_mpl_sum_ = 0.0;
      open_mpl_n_ = 0;
    } else if (r.kind == "assignment") {
      AssignmentRow a = row_from_json(p);
      if (!m.batches.empty()) {
        BatchStats& b = m.batches.back();
        ++b.assignments;
        if (!a.finished) ++b.terminated;
        if (a.duplicate) ++b.duplicates;
        if (a.finished) {
          open_mpl_sum_ += a.latency / a.records;
          ++open_mpl_n_;
        }
      }
      m.assignments.push_back(std::move(a));
    } else if (r.kind == "task") {
      const double latency = p.at("latency").get<double>();
      m.task_latency.push_back(latency);
      open_task_latencies_.push_back(latency);
      m.labels += p.at("records").get<std::size_t>();
      ++m.tasks;
      m.labels_over_time.push_back({r.time - m.first_dispatch.value_or(0.0), m.labels});
    } else if (r.kind == "batch_done") {
      close_batch(r.time);
    } else if (r.kind == "replacement") {
      const auto batch = p.at("batch").get<std::size_t>();
      if (batch < m.batches.size()) ++m.batches[batch].replacements;
    } else if (r.kind == "recruit") {
      ++m.recruits;
    } else if (r.kind == "retrain") {
      m.learning_curve.push_back({r.time - m.first_dispatch.value_or(0.0),
                                  p.at("n_labels").get<std::size_t>(),
                                  p.at("accuracy").get<double>()});
    } else if (r.kind == "pay") {
      m.cost.add(component_from_string(p.at("component").get<std::string>()),
                 Money{p.at("micros").get<std::int64_t>()});
      ++m.pay_events;
    } else if (r.kind == "audit") {
      ++m.audits;
    } else if (r.kind == "run_end") {
      m.end_time = r.time;
      m.total_latency = m.first_dispatch ? r.time - *m.first_dispatch : 0.0;
    } else {
      throw std::invalid_argument("unknown record kind '" + r.kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed " + r.kind + " record " + std::to_string(r.sequence) +
                                ": " + e.what());
  }
}

RunMetrics replay(const std::vector<LogRecord>& records) {
  MetricsRecorder rec;
  for (const auto& r : records) rec.apply(r);
  return rec.metrics();
}

}  // namespace clamshell
