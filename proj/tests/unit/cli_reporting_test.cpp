#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "clamshell/report.hpp"
#include "clamshell/sweep.hpp"

using namespace clamshell;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("clamshell-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.population.family = PopulationFamily::normal_mixture;
  c.population.components = {{0.8, 30, 5}, {0.2, 300, 60}};
  c.task_budget = 30;
  return c;
}

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CLAMSHELL_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), slurp(out), slurp(err)};
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
  RunConfig c = small_config();
  c.name = "trip";
  c.seed = 77;
  c.PM_l = 12.5;
  c.SM = true;
  c.Alg = Algorithm::HL;
  c.votes_required = 3;
  c.routing = RoutingPolicy::oracle;
  c.accuracy_target = 0.9;
  c.retrain = RetrainOptions{1.0, 0.25};
  c.dataset.class_sep = 0.8;
  c.dataset_seed = 4;
  c.rates.terminated_pay = TerminatedPay::prorated;
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());

  RunConfig inf = small_config();
  const Json j = to_json(inf);
  EXPECT_EQ(j.at("PM_l"), "inf");
  EXPECT_EQ(config_from_json(j), inf);
}

TEST(Config, AcceptsTableKeysVerbatim) {
  const Json j = Json::parse(R"({"N_p": 20, "N_g": 10, "R": 0.75, "PM_l": 8, "SM": "on", "Alg": "AL"})");
  const RunConfig c = config_from_json(j);
  EXPECT_EQ(c.N_p, 20u);
  EXPECT_EQ(c.N_g, 10u);
  EXPECT_DOUBLE_EQ(c.R, 0.75);
  EXPECT_DOUBLE_EQ(c.PM_l, 8);
  EXPECT_TRUE(c.SM);
  EXPECT_EQ(c.Alg, Algorithm::AL);
}

TEST(Config, ErrorsCarryFieldPath) {
  auto path_of = [](const std::string& text) -> std::string {
    try {
      config_from_json(Json::parse(text));
    } catch (const ConfigError& e) {
      return e.path();
    }
    return "<none>";
  };
  EXPECT_EQ(path_of(R"({"N_p": 0})"), "N_p");
  EXPECT_EQ(path_of(R"({"maintenance": {"alpha": -2}})"), "maintenance.alpha");
  EXPECT_EQ(path_of(R"({"Alg": "XL"})"), "Alg");
  EXPECT_EQ(path_of(R"({"bogus": 1})"), "bogus");
  EXPECT_EQ(path_of(R"({"learning": {"r": 2}})"), "learning.r");
}

TEST(Config, OverridesAndPresets) {
  RunConfig c = with_override(RunConfig{}, "maintenance.alpha", Json(0.5));
  EXPECT_DOUBLE_EQ(c.alpha, 0.5);
  c = with_override(c, "PM_l", parse_override_value("inf"));
  EXPECT_FALSE(c.maintenance_policy().enabled());
  c = with_override(c, "SM", parse_override_value("on"));
  EXPECT_TRUE(c.SM);
  EXPECT_THROW(with_override(c, "nope", Json(1)), ConfigError);

  const RunConfig nr = apply_preset(RunConfig{}, "base-nr");
  EXPECT_FALSE(nr.retainer);
  EXPECT_FALSE(nr.SM);
  EXPECT_EQ(nr.Alg, Algorithm::PL);
  const RunConfig r = apply_preset(RunConfig{}, "base-r");
  EXPECT_TRUE(r.retainer);
  EXPECT_EQ(r.Alg, Algorithm::AL);
  const RunConfig full = apply_preset(RunConfig{}, "clamshell");
  EXPECT_TRUE(full.SM);
  EXPECT_EQ(full.Alg, Algorithm::HL);
  EXPECT_TRUE(full.maintenance_policy().enabled());
  EXPECT_THROW(apply_preset(RunConfig{}, "fastest"), ConfigError);
}

TEST(Sweep, ExpansionSizes) {
  SweepSpec spec;
  spec.base = small_config();
  spec.axes = {{"PM_l", {Json(2), Json(4), Json(8), Json(16), Json(32), Json("inf")}}};
  EXPECT_EQ(cell_count(spec), 6u);
  EXPECT_EQ(expand(spec).size(), 6u);
  spec.axes = {{"SM", {Json("on"), Json("off")}}, {"PM_l", {Json(8), Json("inf")}}};
  EXPECT_EQ(cell_count(spec), 4u);
  spec.replicates = 3;
  const auto plans = expand(spec);
  EXPECT_EQ(plans.size(), 12u);
  const auto second = std::find_if(plans.begin(), plans.end(), [](const CellPlan& p) { return p.cell_index == 1; });
  ASSERT_NE(second, plans.end());
  EXPECT_EQ(second->settings[0].second, Json("on"));
  EXPECT_EQ(second->settings[1].second, Json("inf"));
  spec.axes.clear();
  spec.replicates = 1;
  EXPECT_EQ(expand(spec).size(), 1u);
  EXPECT_EQ(run_sweep(spec).cells.size(), 1u);
}

TEST(Sweep, CellSeedsIgnoreExecutionOrder) {
  SweepSpec spec;
  spec.base = small_config();
  spec.axes = {{"R", {Json(1), Json(2)}}, {"N_g", {Json(1), Json(5)}}};
  spec.replicates = 2;
  std::set<std::uint64_t> seeds;
  for (const auto& plan : expand(spec)) {
    EXPECT_EQ(plan.seed, cell_seed(spec.base.seed, plan.cell_index, plan.replicate));
    seeds.insert(plan.seed);
  }
  EXPECT_EQ(seeds.size(), 8u);
  SweepSpec reordered = spec;
  std::swap(reordered.axes[0], reordered.axes[1]);
  // A cell's seed is tied to its index, so identical (index, replicate) pairs agree.
  EXPECT_EQ(expand(reordered)[3].seed, expand(spec)[3].seed);
  EXPECT_EQ(cell_seed(1, 3, 1), cell_seed(1, 3, 1));
  EXPECT_NE(cell_seed(1, 3, 1), cell_seed(1, 1, 3));
}

TEST(Sweep, FailingCellDoesNotAbortOthers) {
  SweepSpec spec;
  spec.base = small_config();
  spec.axes = {{"N_p", {Json(15), Json(0), Json(5)}}};
  const SweepReport report = run_sweep(spec);
  ASSERT_EQ(report.cells.size(), 3u);
  EXPECT_EQ(report.cells[0].succeeded, 1u);
  EXPECT_EQ(report.cells[1].succeeded, 0u);
  EXPECT_EQ(report.cells[1].failures.size(), 1u);
  EXPECT_EQ(report.cells[2].succeeded, 1u);
}

TEST(Sweep, SpecParsesFromJson) {
  const Json j = Json::parse(R"({"base": {"task_budget": 15}, "preset": "clamshell",
                                 "axes": {"PM_l": [8, "inf"]}, "replicates": 2})");
  const SweepSpec spec = sweep_from_json(j);
  EXPECT_EQ(spec.base.task_budget, 15u);
  EXPECT_TRUE(spec.base.SM);
  EXPECT_EQ(cell_count(spec), 2u);
  EXPECT_EQ(spec.replicates, 2u);
}

TEST(Summarize, Statistics) {
  const Summary s = summarize({4, 1, 3, 2});
  EXPECT_EQ(s.n, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_NEAR(s.sd, 1.2909944487358056, 1e-12);
  EXPECT_EQ(summarize({}).n, 0u);
}

TEST(Report, PercentilesInterpolateLinearly) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  // rank = q (n - 1); value = lower + frac * (upper - lower)
  EXPECT_DOUBLE_EQ(percentile(v, 0.5), 50.5);
  EXPECT_NEAR(percentile(v, 0.95), 95.05, 1e-9);
  EXPECT_NEAR(percentile(v, 0.99), 99.01, 1e-9);
  EXPECT_DOUBLE_EQ(percentile({7}, 0.99), 7);
  EXPECT_THROW(percentile({}, 0.5), std::invalid_argument);
}

TEST(Report, AgeSlicesCarryThreePercentiles) {
  std::vector<AssignmentRow> rows;
  for (std::uint32_t age = 0; age < 12; ++age) {
    AssignmentRow r;
    r.worker_age = age;
    r.latency = 10.0 + age;
    r.finished = true;
    rows.push_back(r);
  }
  rows.push_back(AssignmentRow{});  // unfinished rows are skipped
  const auto slices = latency_by_age(rows, 5);
  ASSERT_EQ(slices.size(), 3u);
  EXPECT_EQ(slices[0].first_age, 0u);
  EXPECT_EQ(slices[0].last_age, 4u);
  EXPECT_EQ(slices[0].count, 5u + 1u - 1u);
  EXPECT_DOUBLE_EQ(slices[0].p50, 12.0);
  EXPECT_LE(slices[0].p50, slices[0].p95);
  EXPECT_LE(slices[0].p95, slices[0].p99);
  EXPECT_EQ(slices[2].count, 2u);
}

TEST(Report, FilesAreDeterministicAndGanttIsComplete) {
  RunConfig c = small_config();
  c.SM = true;
  c.PM_l = 60;
  const RunResult r = run_experiment(c);
  const fs::path a = scratch("report-a"), b = scratch("report-b");
  const auto files = emit_run_report(r, a);
  emit_run_report(run_experiment(c), b);
  for (const auto& f : files) EXPECT_EQ(slurp(f), slurp(b / f.filename())) << f;
  EXPECT_EQ(line_count(a / "gantt.csv"), r.metrics.assignments.size() + 1);
  const std::string pct = slurp(a / "latency_percentiles.csv");
  EXPECT_NE(pct.find("p50"), std::string::npos);
  EXPECT_NE(pct.find("p95"), std::string::npos);
  EXPECT_NE(pct.find("p99"), std::string::npos);
  EXPECT_TRUE(fs::exists(a / "summary.json"));
  EXPECT_TRUE(fs::exists(a / "events.log"));
  EXPECT_EQ(line_count(a / "batches.csv"), r.metrics.batches.size() + 1);

  const fs::path j = scratch("report-json");
  emit_run_report(r, j, ReportFormat::json);
  EXPECT_TRUE(fs::exists(j / "summary.json"));
}

TEST(Report, UnwritableDestinationFails) {
  const fs::path dir = scratch("report-blocked");
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_run_report(run_experiment(small_config()), dir / "file" / "sub"), ReportError);
}

TEST(Report, SummaryIncludesObjective) {
  const RunResult r = run_experiment(small_config());
  const Json s = run_summary(r);
  const double l = s.at("total_latency_s").get<double>();
  const double cost = s.at("cost").at("total").get<double>();
  EXPECT_NEAR(s.at("objective_denominator").get<double>(), 0.5 * l + 0.5 * cost, 1e-9);
  EXPECT_NEAR(s.at("objective").get<double>(), 1.0 / (0.5 * l + 0.5 * cost), 1e-12);
}

TEST(Report, SweepAggregatesRecomputeFromLogs) {
  SweepSpec spec;
  spec.base = small_config();
  spec.base.SM = true;
  spec.axes = {{"PM_l", {Json(40), Json("inf")}}};
  spec.replicates = 2;
  std::vector<CellRuns> raw;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<LogRecord>> logs;
  const SweepReport live = run_sweep(
      spec, [&](const CellPlan& p, const RunResult& r) { logs[{p.cell_index, p.replicate}] = r.log; }, &raw);
  std::vector<CellRuns> rebuilt = raw;
  for (auto& cell : rebuilt)
    for (auto& run : cell.runs) run.metrics = replay(logs.at({cell.cell_index, run.replicate}));
  EXPECT_EQ(to_json(aggregate({"PM_l"}, rebuilt)).dump(), to_json(live).dump());
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = scratch(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
  fs::path dir;
};

TEST_F(Cli, RunWritesReportAndReplayMatches) {
  std::ofstream(dir / "cfg.json") << to_json(small_config()).dump();
  const auto res = run_cli("run " + (dir / "cfg.json").string() + " --SM on --PM_l 60 --out-dir " +
                               (dir / "out").string(), dir);
  ASSERT_EQ(res.status, 0) << res.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "gantt.csv"));
  const auto rep = run_cli("replay " + (dir / "out" / "events.log").string() + " --out-dir " +
                               (dir / "replayed").string(), dir);
  ASSERT_EQ(rep.status, 0) << rep.err;
  const Json summary = Json::parse(slurp(dir / "out" / "summary.json"));
  const Json metrics = Json::parse(slurp(dir / "replayed" / "metrics.json"));
  EXPECT_EQ(summary.at("labels"), metrics.at("labels"));
}

TEST_F(Cli, SweepThenReportReaggregates) {
  const Json spec{{"base", to_json(small_config())}, {"axes", {{"SM", {"on", "off"}}}}, {"replicates", 2}};
  std::ofstream(dir / "spec.json") << spec.dump();
  const auto res = run_cli("sweep " + (dir / "spec.json").string() + " --out-dir " + (dir / "sw").string(), dir);
  ASSERT_EQ(res.status, 0) << res.err;
  const std::string before = slurp(dir / "sw" / "sweep_summary.json");
  const auto again = run_cli("report " + (dir / "sw").string() + " --out-dir " + (dir / "re").string(), dir);
  ASSERT_EQ(again.status, 0) << again.err;
  EXPECT_EQ(slurp(dir / "re" / "sweep_summary.json"), before);
  EXPECT_TRUE(fs::exists(dir / "sw" / "mpl_by_batch.csv"));
}

TEST_F(Cli, ErrorsAreMachineReadable) {
  std::ofstream(dir / "bad.json") << R"({"N_p": -3})";
  auto res = run_cli("run " + (dir / "bad.json").string() + " --out-dir " + (dir / "o").string(), dir);
  EXPECT_NE(res.status, 0);
  Json err = Json::parse(res.err);
  EXPECT_EQ(err.at("error"), "config");
  EXPECT_EQ(err.at("path"), "N_p");

  std::ofstream(dir / "broken.log") << "not,a,log\n";
  res = run_cli("replay " + (dir / "broken.log").string(), dir);
  EXPECT_NE(res.status, 0);
  EXPECT_EQ(Json::parse(res.err).at("error"), "event_log");

  res = run_cli("frobnicate", dir);
  EXPECT_NE(res.status, 0);
  EXPECT_EQ(Json::parse(res.err).at("error"), "usage");
}
