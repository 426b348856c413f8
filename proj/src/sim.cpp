#include "sepic/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "sepic/rng.hpp"

namespace sepic {

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::bas_pic: return "bas-pic";
    case ControllerKind::penalty_pic: return "penalty-pic";
    case ControllerKind::cbf_npo: return "cbf-npo";
    case ControllerKind::cbf_po: return "cbf-po";
  }
  return "?";
}

std::optional<ControllerKind> controller_from_string(const std::string& s) {
  if (s == "bas-pic") return ControllerKind::bas_pic;
  if (s == "penalty-pic") return ControllerKind::penalty_pic;
  if (s == "cbf-npo") return ControllerKind::cbf_npo;
  if (s == "cbf-po") return ControllerKind::cbf_po;
  return std::nullopt;
}

int ScenarioConfig::total_steps() const { return static_cast<int>(std::llround(t_f / dt)); }

void validate_scenario(const ScenarioConfig& cfg) {
  cfg.graph.validate();
  const int n = cfg.n_agents();
  if (static_cast<int>(cfg.starts.size()) != n)
    throw std::invalid_argument("starts: expected one 4-vector per agent");
  if (static_cast<int>(cfg.goals.size()) != n)
    throw std::invalid_argument("goals: expected one 2-vector per agent");
  if (static_cast<int>(cfg.costs.size()) != n)
    throw std::invalid_argument("costs: expected one entry per agent");
  for (int i = 0; i < n; ++i)
    if (cfg.starts[i].size() != 4)
      throw std::invalid_argument("starts[" + std::to_string(i) + "]: UAV state is (x, y, v, phi)");
  if (cfg.sigma <= 0.0 || cfg.nu <= 0.0)
    throw std::invalid_argument("noise: sigma and nu must be positive");
  if (cfg.dt <= 0.0 || cfg.t_f <= 0.0) throw std::invalid_argument("horizon: t_f and dt must be positive");
  const double steps = cfg.t_f / cfg.dt;
  if (std::abs(steps - std::llround(steps)) > 1e-9)
    throw std::invalid_argument("horizon: dt must divide t_f");
  if (cfg.lambda <= 0.0) throw std::invalid_argument("lambda must be positive");
  if (cfg.n_samples < 1) throw std::invalid_argument("sampler.n_samples must be positive");
  if (cfg.k_max < 1) throw std::invalid_argument("sampler.k_max must be positive");
  if (cfg.n_episodes < 1) throw std::invalid_argument("n_episodes must be positive");
  if (cfg.gamma <= 0.0) throw std::invalid_argument("bas.gamma must be positive");
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d pos = cfg.starts[i].head<2>();
    for (const auto& obs : cfg.obstacles)
      if (h_value(obs, pos) <= 0.0)
        throw std::invalid_argument("starts[" + std::to_string(i) +
                                    "]: agent starts inside obstacle " + std::to_string(obs.id));
  }
  if (!cfg.beta0_override) {
    for (const auto& obs : cfg.obstacles)
      if (h_value(obs, Eigen::Vector2d::Zero()) == 0.0)
        throw std::invalid_argument("obstacle " + std::to_string(obs.id) +
                                    " touches the origin; bas.beta0_override required");
  }
  for (int i = 0; i < n; ++i) {
    const auto& c = cfg.costs[i];
    if (c.coord_partner && (*c.coord_partner < 0 || *c.coord_partner >= n || *c.coord_partner == i))
      throw std::invalid_argument("costs[" + std::to_string(i) + "].coord_partner invalid");
  }
}

std::uint64_t episode_seed(std::uint64_t master_seed, int episode_index) {
  return rng::derive(master_seed, rng::Domain::episode, static_cast<std::uint64_t>(episode_index));
}

void step(const std::vector<AgentModel>& models, const BasSpec& bas, WorldState& world,
          const std::vector<Eigen::Vector2d>& controls, double dt, std::uint64_t noise_key) {
  const double sqrt_dt = std::sqrt(dt);
  const int n = static_cast<int>(models.size());
  for (int i = 0; i < n; ++i) {
    const AgentModel& m = models[i];
    const int p = m.control_dim;
    VectorXd dw(p);
    for (int c = 0; c * 2 < p; ++c) {
      const auto [a, b] =
          rng::normal_pair(rng::combine(noise_key, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(c)));
      dw[2 * c] = a * sqrt_dt;
      if (2 * c + 1 < p) dw[2 * c + 1] = b * sqrt_dt;
    }
    VectorXd effect = controls[i] * dt + m.noise_scale.cwiseProduct(dw);

    VectorXd g(m.state_dim);
    m.drift(world.x[i], 0.0, g);
    MatrixXd b_mat(m.state_dim, m.control_dim);
    m.control_matrix(world.x[i], b_mat);

    // barrier states advance with the same realized noise
    for (int j = 0; j < bas.count(); ++j) {
      const double gb = bas_drift(bas, j, world.x[i], world.z[i][j], 0.0, m);
      const Eigen::RowVectorXd bb = bas_control_row(bas, j, world.x[i], world.z[i][j], m);
      world.z[i][j] += gb * dt + bb.dot(effect);
    }
    world.x[i] += g * dt + b_mat * effect;
  }
}

namespace {

struct SubsystemController {
  AugmentedJointDynamics aug;
  std::unique_ptr<SubsystemCost> cost;
  ControlWeights weights;
};

GoalCoordCost build_goal_coord(const ScenarioConfig& cfg, int agent, const EpisodeConstants& ep,
                               const BasSpec& bas, bool include_bas_terms) {
  const CostSpec& spec = cfg.costs[agent];
  GoalCoordCost gc;
  gc.goal_weight = spec.goal_weight;
  gc.goal = cfg.goals[agent];
  gc.coord_weight = spec.coord_weight;
  gc.coord_partner = spec.coord_partner;
  gc.d_max = ep.d_max[agent];
  gc.d_pair_max = spec.coord_partner ? ep.d_pair_max(agent, *spec.coord_partner) : 0.0;
  if (include_bas_terms) {
    gc.bas_weight = spec.bas_weight;
    gc.indicator_weight = spec.indicator_weight;
    gc.indicator_threshold = spec.indicator_threshold;
    gc.indicator_mode = spec.indicator_mode;
    if (spec.bas_targets) {
      gc.bas_targets = Eigen::Map<const VectorXd>(spec.bas_targets->data(),
                                                  static_cast<Eigen::Index>(spec.bas_targets->size()));
    } else {
      // on-manifold barrier state at the goal position
      gc.bas_targets.resize(bas.count());
      for (int j = 0; j < bas.count(); ++j)
        gc.bas_targets[j] = 1.0 / h_value(bas.constraints[j], cfg.goals[agent]) - bas.beta0[j];
    }
  }
  return gc;
}

std::vector<SubsystemController> build_controllers(const ScenarioConfig& cfg,
                                                   const std::vector<AgentModel>& models,
                                                   const BasSpec& bas,
                                                   const EpisodeConstants& ep) {
  const bool augmented = cfg.controller == ControllerKind::bas_pic;
  const auto subsystems = factorize(cfg.graph, models[0].state_dim);
  std::vector<SubsystemController> out;
  out.reserve(subsystems.size());
  for (const auto& sub : subsystems) {
    std::vector<AgentModel> member_models;
    member_models.reserve(sub.members.size());
    for (int a : sub.members) member_models.push_back(models[a]);

    SubsystemController sc;
    sc.aug = assemble_augmented(sub, member_models, augmented ? bas : BasSpec{});
    if (cfg.partition_override) {
      std::vector<int> direct = *cfg.partition_override;
      std::vector<int> nondirect;
      for (int r = 0; r < sc.aug.total_dim(); ++r)
        if (std::find(direct.begin(), direct.end(), r) == direct.end()) nondirect.push_back(r);
      sc.aug.set_partition(std::move(direct), std::move(nondirect));
    } else {
      auto [direct, nondirect] = partition(sc.aug, default_probe_states(sc.aug));
      sc.aug.set_partition(std::move(direct), std::move(nondirect));
    }

    if (augmented) {
      sc.cost = std::make_unique<GoalCoordSubsystemCost>(
          sc.aug, build_goal_coord(cfg, sub.central, ep, bas, true), cfg.terminal);
    } else {
      PenaltyCostConfig pc;
      pc.base = build_goal_coord(cfg, sub.central, ep, bas, false);
      pc.violation_shape = cfg.violation_shape;
      pc.obstacle_penalty_weight =
          cfg.controller == ControllerKind::cbf_npo ? 0.0 : cfg.obstacle_penalty_weight;
      sc.cost = std::make_unique<PenaltySubsystemCost>(sc.aug, pc, cfg.obstacles, cfg.terminal);
    }
    sc.weights = cancellation_weights(sc.aug.joint_noise_scale(), cfg.lambda);
    out.push_back(std::move(sc));
  }
  return out;
}

VectorXd query_state(const SubsystemController& sc, const WorldState& world) {
  const auto& sub = sc.aug.subsystem();
  VectorXd y(sc.aug.total_dim());
  for (int m = 0; m < sc.aug.n_members(); ++m)
    y.segment(sc.aug.member_offset(m), sc.aug.state_dim()) = world.x[sub.members[m]];
  if (sc.aug.n_bas() > 0) y.segment(sc.aug.bas_offset(), sc.aug.n_bas()) = world.z[sub.central];
  return y;
}

}  // namespace

std::pair<TrajectoryLog, EpisodeMetrics> run_episode(const ScenarioConfig& cfg,
                                                     std::uint64_t seed) {
  validate_scenario(cfg);
  const int n = cfg.n_agents();
  const int steps = cfg.total_steps();
  const bool use_cbf =
      cfg.controller == ControllerKind::cbf_npo || cfg.controller == ControllerKind::cbf_po;

  std::vector<AgentModel> models(n, make_uav_model({cfg.sigma, cfg.nu}));
  const BasSpec bas = BasSpec::make(cfg.gamma, cfg.obstacles, cfg.beta0_override);
  const EpisodeConstants ep = freeze_episode_constants(cfg.starts, cfg.goals);
  auto controllers = build_controllers(cfg, models, bas, ep);

  WorldState world;
  world.x = cfg.starts;
  world.z.resize(n);
  for (int i = 0; i < n; ++i) world.z[i] = bas_init(bas, cfg.starts[i]);

  // coordinating pairs for the pair-distance metric
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    if (cfg.costs[i].coord_weight > 0.0 && cfg.costs[i].coord_partner) {
      const int j = *cfg.costs[i].coord_partner;
      if (i < j || !(cfg.costs[j].coord_weight > 0.0 && cfg.costs[j].coord_partner == i))
        pairs.emplace_back(i, j);
    }

  TrajectoryLog log;
  log.records.reserve(steps + 1);
  EpisodeMetrics metrics;
  metrics.min_margin = std::numeric_limits<double>::infinity();
  metrics.goal_errors.resize(n);
  double pair_distance_sum = 0.0;
  long pair_distance_count = 0;

  auto observe = [&](double t, const std::vector<Eigen::Vector2d>& controls,
                     const std::vector<double>& ess, const std::vector<char>& failed) {
    StepRecord rec;
    rec.t = t;
    rec.states = world.x;
    rec.bas = world.z;
    rec.controls = controls;
    rec.ess = ess;
    rec.controller_failed = failed;
    rec.margins.resize(n, static_cast<int>(cfg.obstacles.size()));
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d pos = world.x[i].head<2>();
      for (std::size_t o = 0; o < cfg.obstacles.size(); ++o) {
        rec.margins(i, static_cast<int>(o)) = h_value(cfg.obstacles[o], pos);
        metrics.min_margin = std::min(metrics.min_margin, rec.margins(i, static_cast<int>(o)));
      }
      for (int j = 0; j < bas.count(); ++j)
        metrics.max_abs_bas = std::max(metrics.max_abs_bas, std::abs(world.z[i][j]));
    }
    for (auto [i, j] : pairs) {
      pair_distance_sum += (world.x[i].head<2>() - world.x[j].head<2>()).norm();
      ++pair_distance_count;
    }
    log.records.push_back(std::move(rec));
  };

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.dt;
    std::vector<Eigen::Vector2d> controls(n, Eigen::Vector2d::Zero());
    std::vector<double> ess(n, 0.0);
    std::vector<char> failed(n, 0);

    for (int i = 0; i < n; ++i) {
      SamplerConfig scfg;
      scfg.n_samples = cfg.n_samples;
      scfg.horizon_mode = cfg.horizon_mode;
      if (cfg.horizon_mode == HorizonMode::shrink_to_tf) {
        // equal partition of [t, t_f]: the window always reaches the exit
        // time and the step shrinks once fewer than k_max sim steps remain
        const int remaining = steps - k;
        scfg.horizon_steps = std::min(cfg.k_max, remaining);
        scfg.eps = (cfg.t_f - t) / scfg.horizon_steps;
      } else {
        scfg.horizon_steps = cfg.k_max;
        scfg.eps = cfg.dt;
      }
      scfg.seed = rng::derive(seed, rng::Domain::controller, static_cast<std::uint64_t>(k),
                              static_cast<std::uint64_t>(i));
      scfg.threads = cfg.threads;

      const VectorXd y0 = query_state(controllers[i], world);
      auto est = estimate_control(controllers[i].aug, *controllers[i].cost,
                                  controllers[i].weights, y0, scfg, t);
      if (!est) {
        failed[i] = 1;
        ++metrics.controller_failures;
        continue;
      }
      ess[i] = est->effective_samples;
      Eigen::Vector2d u = est->local_control;
      if (use_cbf) {
        const auto filtered =
            cbf_filter(u, Eigen::Vector4d(world.x[i]), cfg.obstacles, cfg.cbf);
        u = filtered.control;
        if (filtered.infeasible) ++metrics.cbf_infeasible_steps;
      }
      controls[i] = u;
    }

    observe(t, controls, ess, failed);
    step(models, bas, world,  controls, cfg.dt,
         rng::derive(seed, rng::Domain::environment, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < n; ++i)
      if (!world.x[i].allFinite() || !world.z[i].allFinite())
        throw std::runtime_error("run_episode: state diverged to non-finite values");
  }
  observe(cfg.t_f, std::vector<Eigen::Vector2d>(n, Eigen::Vector2d::Zero()),
          std::vector<double>(n, 0.0), std::vector<char>(n, 0));

  metrics.safe = metrics.min_margin > 0.0;
  for (int i = 0; i < n; ++i)
    metrics.goal_errors[i] = (world.x[i].head<2>() - cfg.goals[i]).norm();
  metrics.mean_pair_distance =
      pair_distance_count > 0 ? pair_distance_sum / static_cast<double>(pair_distance_count) : 0.0;
  return {std::move(log), metrics};
}

BatchReport run_batch(const ScenarioConfig& cfg, const EpisodeObserver& observer) {
  validate_scenario(cfg);
  BatchReport report;
  report.episode_seeds.reserve(cfg.n_episodes);
  report.episodes.reserve(cfg.n_episodes);
  for (int e = 0; e < cfg.n_episodes; ++e) {
    const std::uint64_t seed = episode_seed(cfg.master_seed, e);
    report.episode_seeds.push_back(seed);
    auto [log, metrics] = run_episode(cfg, seed);
    if (observer) observer(e, log, metrics);
    report.episodes.push_back(metrics);
  }
  int safe = 0;
  double goal_sum = 0.0;
  long goal_count = 0;
  double pair_sum = 0.0;
  for (const auto& m : report.episodes) {
    safe += m.safe ? 1 : 0;
    goal_sum += m.goal_errors.sum();
    goal_count += m.goal_errors.size();
    pair_sum += m.mean_pair_distance;
  }
  report.safe_rate = static_cast<double>(safe) / cfg.n_episodes;
  report.mean_goal_error = goal_sum / static_cast<double>(goal_count);
  report.mean_pair_distance = pair_sum / cfg.n_episodes;
  return report;
}

double verify_manifold(const ScenarioConfig& cfg, double dt_override) {
  validate_scenario(cfg);
  const int n = cfg.n_agents();
  const double dt = dt_override;
  const int steps = static_cast<int>(std::llround(cfg.t_f / dt));
  const BasSpec bas = BasSpec::make(cfg.gamma, cfg.obstacles, cfg.beta0_override);
  const AgentModel model = make_uav_model({cfg.sigma, cfg.nu});

  // unit speed heading +y with a gentle heading wobble; for the bundled
  // scenarios this stays well clear of every obstacle
  auto probe_control = [](double t) { return Eigen::Vector2d(0.0, 0.1 * std::sin(0.5 * t)); };

  double max_dev = 0.0;
  for (int i = 0; i < n; ++i) {
    VectorXd x = cfg.starts[i];
    x[2] = 1.0;
    x[3] = 1.5707963267948966;
    VectorXd z = bas_init(bas, x);
    VectorXd g(4);
    MatrixXd b(4, 2);
    for (int k = 0; k <= steps; ++k) {
      const Eigen::Vector2d pos = x.head<2>();
      for (int j = 0; j < bas.count(); ++j) {
        const double h = h_value(bas.constraints[j], pos);
        if (h < 1.0) throw std::runtime_error("verify_manifold: probe trajectory left the safe margin");
        max_dev = std::max(max_dev, std::abs(z[j] - (1.0 / h - bas.beta0[j])));
      }
      if (k == steps) break;
      const double t = k * dt;
      const Eigen::Vector2d u = probe_control(t);
      model.drift(x, t, g);
      model.control_matrix(x, b);
      for (int j = 0; j < bas.count(); ++j) {
        const double gb = bas_drift(bas, j, x, z[j], t, model);
        const Eigen::RowVectorXd bb = bas_control_row(bas, j, x, z[j], model);
        z[j] += dt * (gb + bb.dot(u));
      }
      x += dt * (g + b * u);
    }
  }
  return max_dev;
}

}  // namespace sepic
