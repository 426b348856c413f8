#include "sepic/report.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace sepic {
namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

nlohmann::json metrics_json(const EpisodeMetrics& m) {
  nlohmann::json j;
  j["safe"] = m.safe;
  j["min_margin"] = m.min_margin;
  j["goal_errors"] = std::vector<double>(m.goal_errors.data(),
                                         m.goal_errors.data() + m.goal_errors.size());
  j["mean_pair_distance"] = m.mean_pair_distance;
  j["max_abs_bas"] = m.max_abs_bas;
  j["cbf_infeasible_steps"] = m.cbf_infeasible_steps;
  j["controller_failures"] = m.controller_failures;
  return j;
}

nlohmann::json report_json(const ScenarioConfig& cfg, const BatchReport& report) {
  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["controller"] = to_string(cfg.controller);
  j["episode_seeds"] = report.episode_seeds;
  j["episodes"] = nlohmann::json::array();
  for (const auto& m : report.episodes) j["episodes"].push_back(metrics_json(m));
  j["aggregate"]["safe_rate"] = report.safe_rate;
  j["aggregate"]["mean_goal_error"] = report.mean_goal_error;
  j["aggregate"]["mean_pair_distance"] = report.mean_pair_distance;
  return j;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const ScenarioConfig& cfg, const TrajectoryLog& log) {
  const int n = cfg.n_agents();
  const int n_obs = static_cast<int>(cfg.obstacles.size());
  out << "t";
  for (int i = 1; i <= n; ++i)
    out << ",x" << i << ",y" << i << ",v" << i << ",phi" << i;
  for (int i = 1; i <= n; ++i)
    for (int o = 1; o <= n_obs; ++o) out << ",h" << i << "_" << o;
  for (int i = 1; i <= n; ++i)
    for (int o = 1; o <= n_obs; ++o) out << ",z" << i << "_" << o;
  for (int i = 1; i <= n; ++i) out << ",u" << i << ",w" << i;
  out << "\n";
  out << std::setprecision(17);
  for (const auto& rec : log.records) {
    out << rec.t;
    for (int i = 0; i < n; ++i)
      out << ',' << rec.states[i][0] << ',' << rec.states[i][1] << ',' << rec.states[i][2] << ','
          << rec.states[i][3];
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < n_obs; ++o) out << ',' << rec.margins(i, o);
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < n_obs; ++o) out << ',' << rec.bas[i][o];
    for (int i = 0; i < n; ++i) out << ',' << rec.controls[i][0] << ',' << rec.controls[i][1];
    out << "\n";
  }
}

void write_trajectory_csv(const std::string& path, const ScenarioConfig& cfg,
                          const TrajectoryLog& log) {
  auto out = open_out(path);
  write_trajectory_csv(out, cfg, log);
}

void write_batch_report(std::ostream& out, const ScenarioConfig& cfg, const BatchReport& report) {
  out << report_json(cfg, report).dump(2) << "\n";
}

void write_batch_report(const std::string& path, const ScenarioConfig& cfg,
                        const BatchReport& report) {
  auto out = open_out(path);
  write_batch_report(out, cfg, report);
}

std::string format_metrics_line(const EpisodeMetrics& m) {
  std::ostringstream ss;
  ss << (m.safe ? "safe  " : "UNSAFE") << "  min_margin=" << std::setw(9) << std::setprecision(4)
     << m.min_margin << "  goal_errors=[";
  for (Eigen::Index i = 0; i < m.goal_errors.size(); ++i)
    ss << (i ? ", " : "") << std::setprecision(3) << m.goal_errors[i];
  ss << "]  pair_dist=" << std::setprecision(4) << m.mean_pair_distance
     << "  max|z|=" << std::setprecision(3) << m.max_abs_bas;
  if (m.cbf_infeasible_steps > 0) ss << "  cbf_infeasible=" << m.cbf_infeasible_steps;
  if (m.controller_failures > 0) ss << "  ctrl_failures=" << m.controller_failures;
  return ss.str();
}

std::string format_comparison_table(const std::vector<ComparisonEntry>& entries) {
  std::ostringstream ss;
  ss << std::left << std::setw(14) << "controller" << std::right << std::setw(10) << "safe_rate"
     << std::setw(16) << "mean_goal_err" << std::setw(12) << "pair_dist" << std::setw(10)
     << "unsafe" << "\n";
  for (const auto& e : entries) {
    int unsafe = 0;
    for (const auto& m : e.report.episodes) unsafe += m.safe ? 0 : 1;
    ss << std::left << std::setw(14) << to_string(e.controller) << std::right << std::setw(10)
       << std::setprecision(4) << e.report.safe_rate << std::setw(16) << std::setprecision(4)
       << e.report.mean_goal_error << std::setw(12) << std::setprecision(4)
       << e.report.mean_pair_distance << std::setw(10) << unsafe << "\n";
  }
  return ss.str();
}

void write_comparison_report(const std::string& path, const ScenarioConfig& cfg,
                             const std::vector<ComparisonEntry>& entries) {
  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["controllers"] = nlohmann::json::array();
  for (const auto& e : entries) {
    ScenarioConfig c = cfg;
    c.controller = e.controller;
    j["controllers"].push_back(report_json(c, e.report));
  }
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

}  // namespace sepic
