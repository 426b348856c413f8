#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sepic/sim.hpp"

namespace sepic {

// Column order: t, per-agent x,y,v,phi, per-agent per-obstacle h,
// per-agent per-constraint z, per-agent u,w.
void write_trajectory_csv(std::ostream& out, const ScenarioConfig& cfg, const TrajectoryLog& log);
void write_trajectory_csv(const std::string& path, const ScenarioConfig& cfg,
                          const TrajectoryLog& log);

void write_batch_report(std::ostream& out, const ScenarioConfig& cfg, const BatchReport& report);
void write_batch_report(const std::string& path, const ScenarioConfig& cfg,
                        const BatchReport& report);

struct ComparisonEntry {
  ControllerKind controller;
  BatchReport report;
};

std::string format_comparison_table(const std::vector<ComparisonEntry>& entries);
void write_comparison_report(const std::string& path, const ScenarioConfig& cfg,
                             const std::vector<ComparisonEntry>& entries);

std::string format_metrics_line(const EpisodeMetrics& m);

}  // namespace sepic
