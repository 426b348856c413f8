#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sepic/baselines.hpp"
#include "sepic/cost.hpp"
#include "sepic/dynamics.hpp"
#include "sepic/pic.hpp"
#include "sepic/topology.hpp"

namespace sepic {

enum class ControllerKind { bas_pic, penalty_pic, cbf_npo, cbf_po };

std::string to_string(ControllerKind k);
std::optional<ControllerKind> controller_from_string(const std::string& s);

// Scenario cost weights for one subsystem (central agent's view).
struct CostSpec {
  double goal_weight = 0.0;
  double coord_weight = 0.0;
  std::optional<int> coord_partner;
  double bas_weight = 0.0;
  double indicator_weight = 0.0;
  double indicator_threshold = 0.01;
  IndicatorMode indicator_mode = IndicatorMode::product;
  std::optional<std::vector<double>> bas_targets;  // default: on-manifold value at the goal
};

struct ScenarioConfig {
  std::string name = "scenario";
  AgentGraph graph;
  std::vector<VectorXd> starts;  // per agent, (x, y, v, phi)
  std::vector<Eigen::Vector2d> goals;
  std::vector<BarrierConstraint> obstacles;
  double gamma = 0.5;
  std::optional<std::vector<double>> beta0_override;
  std::vector<CostSpec> costs;
  TerminalCost terminal;
  ControllerKind controller = ControllerKind::bas_pic;
  double sigma = 0.1;
  double nu = 0.05;
  double t_f = 20.0;
  double dt = 0.05;
  int n_samples = 2000;
  int k_max = 40;
  HorizonMode horizon_mode = HorizonMode::shrink_to_tf;
  double lambda = 0.1;
  double obstacle_penalty_weight = 50.0;
  ViolationShape violation_shape = ViolationShape::indicator;
  CbfFilterConfig cbf;
  int n_episodes = 8;
  std::uint64_t master_seed = 1;
  std::optional<std::vector<int>> partition_override;
  int threads = 0;

  int n_agents() const { return graph.n_agents; }
  int total_steps() const;
};

void validate_scenario(const ScenarioConfig& cfg);  // throws std::invalid_argument

struct StepRecord {
  double t = 0.0;
  std::vector<VectorXd> states;           // per agent physical state
  std::vector<VectorXd> bas;              // per agent barrier states
  std::vector<Eigen::Vector2d> controls;  // applied this step (zero on final record)
  MatrixXd margins;                       // agents x obstacles
  std::vector<double> ess;                // controller effective sample size
  std::vector<char> controller_failed;
};

struct TrajectoryLog {
  std::vector<StepRecord> records;
};

struct EpisodeMetrics {
  bool safe = false;
  double min_margin = 0.0;
  VectorXd goal_errors;
  double mean_pair_distance = 0.0;
  double max_abs_bas = 0.0;
  int cbf_infeasible_steps = 0;
  int controller_failures = 0;
};

struct BatchReport {
  std::vector<std::uint64_t> episode_seeds;
  std::vector<EpisodeMetrics> episodes;
  double safe_rate = 0.0;
  double mean_goal_error = 0.0;
  double mean_pair_distance = 0.0;
};

// World state of the full MAS plus per-agent barrier states.
struct WorldState {
  std::vector<VectorXd> x;
  std::vector<VectorXd> z;
};

// One Euler-Maruyama step of every agent; the barrier states are integrated
// with the same noise realization that drives the physical states.
void step(const std::vector<AgentModel>& models, const BasSpec& bas, WorldState& world,
          const std::vector<Eigen::Vector2d>& controls, double dt, std::uint64_t noise_key);

std::pair<TrajectoryLog, EpisodeMetrics> run_episode(const ScenarioConfig& cfg,
                                                     std::uint64_t episode_seed);

using EpisodeObserver =
    std::function<void(int episode, const TrajectoryLog&, const EpisodeMetrics&)>;
BatchReport run_batch(const ScenarioConfig& cfg, const EpisodeObserver& observer = nullptr);

std::uint64_t episode_seed(std::uint64_t master_seed, int episode_index);

// Deterministic manifold check: noise off, gentle open-loop probe control,
// returns max |z - (beta(x) - beta0)| over the run.
double verify_manifold(const ScenarioConfig& cfg, double dt_override);

}  // namespace sepic
