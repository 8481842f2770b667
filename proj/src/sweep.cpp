#include "clamshell/sweep.hpp"

#include <algorithm>
#include <cmath>

namespace clamshell {

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t cell_index, std::size_t replicate) {
  return derive_seed(base_seed, stable_hash("cell"), cell_index, replicate);
}

std::size_t cell_count(const SweepSpec& spec) {
  std::size_t n = 1;
  for (const auto& a : spec.axes) n *= a.values.size();
  return n;
}

std::vector<CellPlan> expand(const SweepSpec& spec) {
  std::vector<CellPlan> plans;
  const std::size_t cells = cell_count(spec);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<Setting> settings(spec.axes.size());
    std::size_t rem = cell;
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      const auto& axis = spec.axes[a];
      settings[a] = {axis.key, axis.values[rem % axis.values.size()]};
      rem /= axis.values.size();
    }
    for (std::size_t rep = 0; rep < spec.replicates; ++rep)
      plans.push_back({cell, rep, cell_seed(spec.base.seed, cell, rep), settings});
  }
  return plans;
}

RunConfig cell_config(const SweepSpec& spec, const CellPlan& plan) {
  RunConfig c = spec.base;
  for (const auto& [key, value] : plan.settings) c = with_override(c, key, value);
  c.seed = plan.seed;
  return c;
}

Summary summarize(std::vector<double> v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

namespace {

std::vector<double> mean_by_index(const std::vector<std::vector<double>>& series) {
  std::size_t len = 0;
  for (const auto& s : series) len = std::max(len, s.size());
  std::vector<double> out(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : series)
      if (i < s.size() && std::isfinite(s[i])) {
        sum += s[i];
        ++n;
      }
    out[i] = n ? sum / static_cast<double>(n) : std::nan("");
  }
  return out;
}

Json summary_json(const Summary& s) {
  return Json{{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"sd", s.sd}};
}

}  // namespace

SweepReport aggregate(const std::vector<std::string>& axis_keys, const std::vector<CellRuns>& cells) {
  SweepReport report;
  report.axis_keys = axis_keys;
  for (const auto& cell : cells) {
    CellAggregate agg;
    agg.cell_index = cell.cell_index;
    agg.settings = cell.settings;
    std::vector<double> makespans, sds, latency, cost, repl, throughput;
    std::vector<std::vector<double>> mpl, repl_series;
    for (const auto& run : cell.runs) {
      if (!run.metrics) {
        agg.failures.push_back("replicate " + std::to_string(run.replicate) + " (seed " +
                               std::to_string(run.seed) + "): " + run.error);
        continue;
      }
      const RunMetrics& m = *run.metrics;
      ++agg.succeeded;
      const auto ms = m.makespans();
      makespans.insert(makespans.end(), ms.begin(), ms.end());
      sds.push_back(summarize(ms).sd);
      latency.push_back(m.total_latency);
      cost.push_back(m.cost.total().dollars());
      repl.push_back(static_cast<double>(m.total_replacements()));
      throughput.push_back(m.total_latency > 0 ? static_cast<double>(m.labels) / m.total_latency : 0.0);
      mpl.push_back(m.mpl_series());
      repl_series.push_back(m.replacement_series());
      agg.learning_curves.push_back(m.learning_curve);
    }
    agg.makespan = summarize(makespans);
    agg.makespan_sd = summarize(sds);
    agg.total_latency = summarize(latency);
    agg.cost = summarize(cost);
    agg.replacements = summarize(repl);
    agg.throughput = summarize(throughput);
    agg.mpl_by_batch = mean_by_index(mpl);
    agg.replacements_by_batch = mean_by_index(repl_series);
    report.cells.push_back(std::move(agg));
  }
  return report;
}

SweepReport run_sweep(const SweepSpec& spec,
                      const std::function<void(const CellPlan&, const RunResult&)>& on_run,
                      std::vector<CellRuns>* raw) {
  std::vector<CellRuns> cells;
  for (const auto& plan : expand(spec)) {
    if (cells.empty() || cells.back().cell_index != plan.cell_index)
      cells.push_back({plan.cell_index, plan.settings, {}});
    ReplicateOutcome out{plan.replicate, plan.seed, std::nullopt, {}};
    try {
      const RunResult result = run_experiment(cell_config(spec, plan));
      if (on_run) on_run(plan, result);
      out.metrics = result.metrics;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    cells.back().runs.push_back(std::move(out));
  }
  std::vector<std::string> keys;
  for (const auto& a : spec.axes) keys.push_back(a.key);
  SweepReport report = aggregate(keys, cells);
  if (raw) *raw = std::move(cells);
  return report;
}

Json to_json(const SweepReport& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json settings = Json::object();
    for (const auto& [k, v] : c.settings) settings[k] = v;
    Json curves = Json::array();
    for (const auto& curve : c.learning_curves) {
      Json pts = Json::array();
      for (const auto& p : curve) pts.push_back(Json::array({p.wallclock_s, p.n_labels, p.accuracy}));
      curves.push_back(std::move(pts));
    }
    cells.push_back(Json{{"cell", c.cell_index},
                         {"settings", settings},
                         {"succeeded", c.succeeded},
                         {"failures", c.failures},
                         {"makespan", summary_json(c.makespan)},
                         {"makespan_sd", summary_json(c.makespan_sd)},
                         {"total_latency_s", summary_json(c.total_latency)},
                         {"cost_dollars", summary_json(c.cost)},
                         {"replacements", summary_json(c.replacements)},
                         {"throughput_labels_per_s", summary_json(c.throughput)},
                         {"mpl_by_batch", c.mpl_by_batch},
                         {"replacements_by_batch", c.replacements_by_batch},
                         {"learning_curves", curves}});
  }
  return Json{{"axes", report.axis_keys}, {"cells", cells}};
}

Json to_json(const SweepSpec& spec) {
  Json axes = Json::object();
  for (const auto& a : spec.axes) axes[a.key] = a.values;
  return Json{{"base", to_json(spec.base)}, {"axes", axes}, {"replicates", spec.replicates}};
}

SweepSpec sweep_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "sweep spec must be an object");
  SweepSpec spec;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "base" && it.key() != "preset" && it.key() != "axes" && it.key() != "replicates")
      throw ConfigError(it.key(), "unknown key");
  spec.base = j.contains("base") ? config_from_json(j.at("base")) : RunConfig{};
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("preset", "expected a string");
    spec.base = apply_preset(spec.base, j.at("preset").get<std::string>());
  }
  if (j.contains("replicates")) {
    if (!j.at("replicates").is_number_unsigned() || j.at("replicates").get<std::size_t>() < 1)
      throw ConfigError("replicates", "expected a positive integer");
    spec.replicates = j.at("replicates").get<std::size_t>();
  }
  if (j.contains("axes")) {
    const Json& axes = j.at("axes");
    if (!axes.is_object()) throw ConfigError("axes", "expected an object of value lists");
    for (auto it = axes.begin(); it != axes.end(); ++it) {
      if (!it.value().is_array() || it.value().empty())
        throw ConfigError("axes." + it.key(), "expected a non-empty list");
      SweepAxis axis{it.key(), {}};
      for (const auto& v : it.value()) axis.values.push_back(v);
      // Surface bad keys or values before anything runs.
      for (const auto& v : axis.values) {
        try {
          (void)with_override(spec.base, axis.key, v);
        } catch (const ConfigError& e) {
          throw ConfigError("axes." + axis.key, e.what());
        }
      }
      spec.axes.push_back(std::move(axis));
    }
  }
  return spec;
}

}  // namespace clamshell
