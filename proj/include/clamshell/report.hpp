#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "clamshell/engine.hpp"
#include "clamshell/metrics.hpp"
#include "clamshell/sweep.hpp"

namespace clamshell {

enum class ReportFormat { csv, json };

ReportFormat report_format_from_string(const std::string& name);

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear interpolation between order statistics; q in [0,1].
double percentile(std::vector<double> values, double q);

struct AgeSlice {
  std::uint32_t first_age = 0;
  std::uint32_t last_age = 0;
  std::size_t count = 0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

/// Task latency percentiles of finished assignments, grouped by how many
/// tasks the worker had completed when the assignment started.
std::vector<AgeSlice> latency_by_age(const std::vector<AssignmentRow>& rows,
                                     std::uint32_t slice_width = 5);

Json run_summary(const RunResult& result);

// Writes the run's tables, summary and event log. Returns the files written.
std::vector<std::filesystem::path> emit_run_report(const RunResult& result,
                                                   const std::filesystem::path& out_dir,
                                                   ReportFormat format = ReportFormat::csv);

std::vector<std::filesystem::path> emit_sweep_report(const SweepReport& report,
                                                     const std::filesystem::path& out_dir,
                                                     ReportFormat format = ReportFormat::csv);

}  // namespace clamshell
