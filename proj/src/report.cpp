#include "clamshell/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "clamshell/cost.hpp"

namespace clamshell {

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown report format '" + name + "' (expected csv or json)");
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile q must lie in [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<AgeSlice> latency_by_age(const std::vector<AssignmentRow>& rows,
                                     std::uint32_t slice_width) {
  if (slice_width == 0) throw std::invalid_argument("slice_width must be >= 1");
  std::map<std::uint32_t, std::vector<double>> buckets;
  for (const auto& r : rows)
    if (r.finished) buckets[r.worker_age / slice_width].push_back(r.latency);
  std::vector<AgeSlice> out;
  for (const auto& [b, v] : buckets)
    out.push_back({b * slice_width, b * slice_width + slice_width - 1, v.size(), percentile(v, 0.50),
                   percentile(v, 0.95), percentile(v, 0.99)});
  return out;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Writer {
 public:
  Writer(const std::filesystem::path& dir, const std::string& name, std::vector<std::filesystem::path>& written)
      : path_(dir / name), out_(path_) {
    if (!out_) throw ReportError("cannot write " + path_.string());
    written.push_back(path_);
  }
  ~Writer() noexcept(false) {
    out_.flush();
    if (!out_ && std::uncaught_exceptions() == 0) throw ReportError("write failed for " + path_.string());
  }
  std::ofstream& out() { return out_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ReportError("cannot create output directory " + dir.string() +
                      (ec ? ": " + ec.message() : std::string()));
}

}  // namespace

Json run_summary(const RunResult& r) {
  const RunMetrics& m = r.metrics;
  const double cost = m.cost.total().dollars();
  Json objective = nullptr, denominator = nullptr;
  try {
    denominator = objective_denominator(m.total_latency, cost, r.config.beta);
    objective = clamshell::objective(m.total_latency, cost, r.config.beta);
  } catch (const std::domain_error&) {
  }
  std::vector<double> ms = m.makespans();
  double mean = 0.0, sd = 0.0;
  for (double x : ms) mean += x;
  if (!ms.empty()) mean /= static_cast<double>(ms.size());
  if (ms.size() > 1) {
    for (double x : ms) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(ms.size() - 1));
  }
  Json s;
  s["name"] = r.config.name;
  s["seed"] = r.config.seed;
  s["batches"] = m.batches.size();
  s["tasks"] = m.tasks;
  s["labels"] = m.labels;
  s["assignments"] = m.assignments.size();
  s["total_latency_s"] = m.total_latency;
  s["throughput_labels_per_s"] = m.total_latency > 0 ? m.labels / m.total_latency : 0.0;
  s["makespan_mean_s"] = mean;
  s["makespan_sd_s"] = sd;
  s["replacements"] = m.total_replacements();
  s["cost"] = Json{{"wait", m.cost.wait.dollars()},
                   {"work", m.cost.work.dollars()},
                   {"recruitment", m.cost.recruitment.dollars()},
                   {"total", cost}};
  s["beta"] = r.config.beta;
  s["objective"] = objective;
  s["objective_denominator"] = denominator;
  s["final_accuracy"] = m.learning_curve.empty() ? Json(nullptr) : Json(m.learning_curve.back().accuracy);
  s["warnings"] = r.warnings;
  s["config"] = to_json(r.config);
  return s;
}

std::vector<std::filesystem::path> emit_run_report(const RunResult& r,
                                                   const std::filesystem::path& dir,
                                                   ReportFormat format) {
  ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  const RunMetrics& m = r.metrics;
  {
    Writer w(dir, "summary.json", written);
    Json s = run_summary(r);
    if (format == ReportFormat::json) s["metrics"] = to_json(m);
    w.out() << s.dump(2) << '\n';
  }
  {
    Writer w(dir, "events.log", written);
    write_event_log(w.out(), r.log);
  }
  if (format == ReportFormat::json) return written;

  {
    Writer w(dir, "batches.csv", written);
    w.out() << "batch,dispatched_at,completed_at,makespan_s,tasks,assignments,terminated,duplicates,"
               "mpl_s,pool_true_mean_s,replacements,task_latency_sd_s\n";
    for (const auto& b : m.batches)
      w.out() << b.index << ',' << num(b.dispatched_at) << ',' << num(b.completed_at) << ','
              << num(b.makespan) << ',' << b.tasks << ',' << b.assignments << ',' << b.terminated
              << ',' << b.duplicates << ',' << num(b.mpl) << ',' << num(b.pool_true_mean) << ','
              << b.replacements << ',' << num(b.task_latency_sd) << '\n';
  }
  {
    Writer w(dir, "labels_over_time.csv", written);
    w.out() << "wallclock_s,labels\n";
    for (const auto& l : m.labels_over_time) w.out() << num(l.wallclock_s) << ',' << l.labels << '\n';
  }
  {
    Writer w(dir, "task_latency.csv", written);
    w.out() << "task_index,latency_s\n";
    for (std::size_t i = 0; i < m.task_latency.size(); ++i)
      w.out() << i << ',' << num(m.task_latency[i]) << '\n';
  }
  {
    Writer w(dir, "gantt.csv", written);
    w.out() << "assignment_id,task_id,slot_id,start_s,end_s,status,worker,batch,records,worker_age,"
               "duplicate,due_s,latency_s\n";
    for (const auto& a : m.assignments)
      w.out() << a.assignment_id << ',' << a.task_id << ',' << a.slot_id << ',' << num(a.started_at)
              << ',' << num(a.ended_at) << ',' << (a.finished ? "finished" : "terminated") << ','
              << a.worker_id << ',' << a.batch << ',' << a.records << ',' << a.worker_age << ','
              << (a.duplicate ? 1 : 0) << ',' << num(a.finish_at) << ',' << num(a.latency) << '\n';
  }
  {
    Writer w(dir, "learning_curve.csv", written);
    w.out() << "wallclock_s,n_labels,accuracy\n";
    for (const auto& p : m.learning_curve)
      w.out() << num(p.wallclock_s) << ',' << p.n_labels << ',' << num(p.accuracy) << '\n';
  }
  {
    Writer w(dir, "latency_percentiles.csv", written);
    w.out() << "age_first,age_last,count,p50_s,p95_s,p99_s\n";
    for (const auto& s : latency_by_age(m.assignments))
      w.out() << s.first_age << ',' << s.last_age << ',' << s.count << ',' << num(s.p50) << ','
              << num(s.p95) << ',' << num(s.p99) << '\n';
  }
  return written;
}

std::vector<std::filesystem::path> emit_sweep_report(const SweepReport& report,
                                                     const std::filesystem::path& dir,
                                                     ReportFormat format) {
  ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  {
    Writer w(dir, "sweep_summary.json", written);
    w.out() << to_json(report).dump(2) << '\n';
  }
  if (format == ReportFormat::json) return written;

  {
    Writer w(dir, "sweep_summary.csv", written);
    w.out() << "cell";
    for (const auto& k : report.axis_keys) w.out() << ',' << k;
    w.out() << ",succeeded,failed,makespan_median_s,makespan_mean_s,makespan_sd_s,"
               "per_run_makespan_sd_mean_s,total_latency_median_s,cost_median,"
               "replacements_mean,throughput_median\n";
    for (const auto& c : report.cells) {
      w.out() << c.cell_index;
      for (const auto& [k, v] : c.settings) w.out() << ',' << (v.is_string() ? v.get<std::string>() : v.dump());
      w.out() << ',' << c.succeeded << ',' << c.failures.size() << ',' << num(c.makespan.median) << ','
              << num(c.makespan.mean) << ',' << num(c.makespan.sd) << ',' << num(c.makespan_sd.mean)
              << ',' << num(c.total_latency.median) << ',' << num(c.cost.median) << ','
              << num(c.replacements.mean) << ',' << num(c.throughput.median) << '\n';
    }
  }
  {
    Writer w(dir, "mpl_by_batch.csv", written);
    w.out() << "cell,batch,mpl_s,replacements\n";
    for (const auto& c : report.cells)
      for (std::size_t i = 0; i < c.mpl_by_batch.size(); ++i)
        w.out() << c.cell_index << ',' << i << ',' << num(c.mpl_by_batch[i]) << ','
                << num(i < c.replacements_by_batch.size() ? c.replacements_by_batch[i] : std::nan(""))
                << '\n';
  }
  {
    Writer w(dir, "learning_curves.csv", written);
    w.out() << "cell,replicate,wallclock_s,n_labels,accuracy\n";
    for (const auto& c : report.cells)
      for (std::size_t rep = 0; rep < c.learning_curves.size(); ++rep)
        for (const auto& p : c.learning_curves[rep])
          w.out() << c.cell_index << ',' << rep << ',' << num(p.wallclock_s) << ',' << p.n_labels
                  << ',' << num(p.accuracy) << '\n';
  }
  return written;
}

}  // namespace clamshell
