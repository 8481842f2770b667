#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clamshell/config.hpp"
#include "clamshell/engine.hpp"
#include "clamshell/event_log.hpp"
#include "clamshell/metrics.hpp"
#include "clamshell/report.hpp"
#include "clamshell/sweep.hpp"

namespace fs = std::filesystem;
using namespace clamshell;

namespace {

int fail(const std::string& kind, const std::string& message, const std::string& path = {}) {
  Json err{{"error", kind}, {"message", message}};
  if (!path.empty()) err["path"] = path;
  std::cerr << err.dump() << '\n';
  return 1;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", path.string() + " is not valid JSON: " + e.what());
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> N_p, N_g, R, PM_l, SM, Alg;
  std::vector<std::string> sets;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Base random seed");
    cmd->add_option("--N_p", N_p, "Retainer pool size");
    cmd->add_option("--N_g", N_g, "Records per task");
    cmd->add_option("--R", R, "Pool-to-batch ratio");
    cmd->add_option("--PM_l", PM_l, "Maintenance threshold in seconds per label, or inf");
    cmd->add_option("--SM", SM, "Straggler mitigation (on/off)");
    cmd->add_option("--Alg", Alg, "AL, PL, HL or NL");
    cmd->add_option("--set", sets, "Any config key as key=value (dotted for nested keys)");
  }

  RunConfig apply(RunConfig c) const {
    const std::map<std::string, const std::optional<std::string>*> table{
        {"N_p", &N_p}, {"N_g", &N_g}, {"R", &R}, {"PM_l", &PM_l}, {"SM", &SM}, {"Alg", &Alg}};
    for (const auto& [key, value] : table)
      if (*value) c = with_override(c, key, parse_override_value(**value));
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "expected key=value");
      c = with_override(c, s.substr(0, eq), parse_override_value(s.substr(eq + 1)));
    }
    if (seed) c.seed = *seed;
    return c;
  }
};

std::string log_name(const CellPlan& plan) {
  return "cell-" + std::to_string(plan.cell_index) + "-rep-" + std::to_string(plan.replicate) + ".log";
}

int cmd_run(const std::optional<std::string>& config_path, const std::optional<std::string>& preset,
            const Overrides& ov, const std::string& out_dir, const std::string& format) {
  RunConfig c = config_path ? load_config(*config_path) : RunConfig{};
  if (preset) c = apply_preset(c, *preset);
  c = ov.apply(c);
  const RunResult result = run_experiment(c);
  emit_run_report(result, out_dir, report_format_from_string(format));
  std::cout << run_summary(result).dump(2) << '\n';
  return 0;
}

int cmd_sweep(const std::string& spec_path, const Overrides& ov, std::optional<std::size_t> replicates,
              const std::string& out_dir, const std::string& format) {
  SweepSpec spec = sweep_from_json(read_json_file(spec_path));
  spec.base = ov.apply(spec.base);
  if (replicates) {
    if (*replicates < 1) throw ConfigError("replicates", "must be >= 1");
    spec.replicates = *replicates;
  }
  const fs::path runs = fs::path(out_dir) / "runs";
  fs::create_directories(runs);
  Json index = Json::array();
  std::vector<CellRuns> raw;
  const SweepReport report = run_sweep(
      spec,
      [&](const CellPlan& plan, const RunResult& result) {
        std::ofstream log(runs / log_name(plan));
        if (!log) throw ReportError("cannot write " + (runs / log_name(plan)).string());
        write_event_log(log, result.log);
      },
      &raw);
  for (const auto& cell : raw)
    for (const auto& run : cell.runs) {
      Json settings = Json::object();
      for (const auto& [k, v] : cell.settings) settings[k] = v;
      CellPlan plan{cell.cell_index, run.replicate, run.seed, cell.settings};
      index.push_back(Json{{"cell", cell.cell_index},
                           {"replicate", run.replicate},
                           {"seed", run.seed},
                           {"settings", settings},
                           {"log", run.metrics ? Json(log_name(plan)) : Json(nullptr)},
                           {"error", run.error}});
    }
  {
    std::ofstream idx(runs / "index.json");
    idx << Json{{"axes", report.axis_keys}, {"runs", index}}.dump(2) << '\n';
  }
  {
    std::ofstream s(fs::path(out_dir) / "sweep_spec.json");
    s << to_json(spec).dump(2) << '\n';
  }
  emit_sweep_report(report, out_dir, report_format_from_string(format));
  std::size_t failures = 0;
  for (const auto& c : report.cells) failures += c.failures.size();
  std::cout << Json{{"cells", report.cells.size()}, {"failures", failures}, {"out_dir", out_dir}}.dump()
            << '\n';
  return 0;
}

int cmd_replay(const std::string& log_path, const std::optional<std::string>& out_dir) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open " + log_path);
  const RunMetrics m = replay(read_event_log(in));
  const std::string text = to_json(m).dump(2);
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream out(fs::path(*out_dir) / "metrics.json");
    if (!out) throw ReportError("cannot write metrics.json in " + *out_dir);
    out << text << '\n';
  }
  std::cout << text << '\n';
  return 0;
}

int cmd_report(const std::string& sweep_dir, const std::optional<std::string>& out_dir,
               const std::string& format) {
  const fs::path runs = fs::path(sweep_dir) / "runs";
  const Json index = read_json_file(runs / "index.json");
  std::vector<std::string> axes = index.at("axes").get<std::vector<std::string>>();
  std::vector<CellRuns> cells;
  for (const auto& entry : index.at("runs")) {
    const auto cell = entry.at("cell").get<std::size_t>();
    if (cells.empty() || cells.back().cell_index != cell) {
      CellRuns c{cell, {}, {}};
      for (auto it = entry.at("settings").begin(); it != entry.at("settings").end(); ++it)
        c.settings.emplace_back(it.key(), it.value());
      cells.push_back(std::move(c));
    }
    ReplicateOutcome out{entry.at("replicate").get<std::size_t>(), entry.at("seed").get<std::uint64_t>(),
                         std::nullopt, entry.at("error").get<std::string>()};
    if (!entry.at("log").is_null()) {
      std::ifstream in(runs / entry.at("log").get<std::string>());
      if (!in) throw std::runtime_error("missing run log " + entry.at("log").get<std::string>());
      out.metrics = replay(read_event_log(in));
    }
    cells.back().runs.push_back(std::move(out));
  }
  const SweepReport report = aggregate(axes, cells);
  emit_sweep_report(report, out_dir.value_or(sweep_dir), report_format_from_string(format));
  std::cout << to_json(report).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd labeling latency simulator"};
  app.require_subcommand(1);
  std::string out_dir = "out";
  std::string format = "csv";

  auto* run = app.add_subcommand("run", "Run one configured experiment");
  std::optional<std::string> config_path, preset;
  Overrides run_ov;
  run->add_option("config", config_path, "Config file (JSON)");
  run->add_option("--preset", preset, "base-nr, base-r or clamshell");
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_option("--format", format, "csv or json");
  run_ov.add(run);

  auto* sweep = app.add_subcommand("sweep", "Run an experiment matrix");
  std::string spec_path;
  std::optional<std::size_t> replicates;
  Overrides sweep_ov;
  sweep->add_option("spec", spec_path, "Sweep spec file (JSON)")->required();
  sweep->add_option("--replicates", replicates, "Seeds per cell");
  sweep->add_option("--out-dir", out_dir, "Output directory");
  sweep->add_option("--format", format, "csv or json");
  sweep_ov.add(sweep);

  auto* rep = app.add_subcommand("replay", "Recompute metrics from an event log");
  std::string log_path;
  std::optional<std::string> replay_out;
  rep->add_option("log", log_path, "Event log file")->required();
  rep->add_option("--out-dir", replay_out, "Also write metrics.json here");

  auto* report = app.add_subcommand("report", "Re-aggregate a sweep from its run logs");
  std::string sweep_dir;
  std::optional<std::string> report_out;
  report->add_option("dir", sweep_dir, "Sweep output directory")->required();
  report->add_option("--out-dir", report_out, "Where to write the report (default: dir)");
  report->add_option("--format", format, "csv or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*run) return cmd_run(config_path, preset, run_ov, out_dir, format);
    if (*sweep) return cmd_sweep(spec_path, sweep_ov, replicates, out_dir, format);
    if (*rep) return cmd_replay(log_path, replay_out);
    if (*report) return cmd_report(sweep_dir, report_out, format);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.path());
  } catch (const LogParseError& e) {
    return fail("event_log", e.what());
  } catch (const ReportError& e) {
    return fail("report", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
