#include "sepic/cost.hpp"

#include <cmath>
#include <stdexcept>

namespace sepic {

ControlWeights cancellation_weights(Eigen::Ref<const VectorXd> joint_noise_scale, double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("cancellation_weights: lambda must be positive");
  ControlWeights w;
  w.lambda = lambda;
  w.r_diag.resize(joint_noise_scale.size());
  for (Eigen::Index k = 0; k < joint_noise_scale.size(); ++k) {
    const double s = joint_noise_scale[k];
    if (s <= 0.0)
      throw std::invalid_argument(
          "cancellation_weights: zero-noise control channel makes the cancellation "
          "condition unsatisfiable");
    w.r_diag[k] = lambda / (s * s);
  }
  return w;
}

EpisodeConstants freeze_episode_constants(const std::vector<VectorXd>& starts,
                                          const std::vector<Eigen::Vector2d>& goals) {
  const int n = static_cast<int>(starts.size());
  if (goals.size() != starts.size())
    throw std::invalid_argument("freeze_episode_constants: starts/goals size mismatch");
  EpisodeConstants c;
  c.d_max.resize(n);
  c.d_pair_max = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    c.d_max[i] = (starts[i].head<2>() - goals[i]).norm();
    for (int j = 0; j < n; ++j)
      c.d_pair_max(i, j) = (starts[i].head<2>() - starts[j].head<2>()).norm();
  }
  return c;
}

VectorXd SubsystemCost::gradient_direct(Eigen::Ref<const VectorXd> y,
                                        const std::vector<int>& direct) const {
  constexpr double step = 1e-6;
  VectorXd grad(direct.size());
  VectorXd probe = y;
  for (std::size_t k = 0; k < direct.size(); ++k) {
    const int idx = direct[k];
    const double saved = probe[idx];
    probe[idx] = saved + step;
    const double up = running(probe);
    probe[idx] = saved - step;
    const double down = running(probe);
    probe[idx] = saved;
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

GoalCoordSubsystemCost::GoalCoordSubsystemCost(const AugmentedJointDynamics& aug,
                                               GoalCoordCost cfg, TerminalCost terminal)
    : cfg_(std::move(cfg)), term_(terminal) {
  n_bas_ = aug.n_bas();
  bas_offset_ = aug.bas_offset();
  if (cfg_.bas_weight != 0.0 && cfg_.bas_targets.size() != n_bas_)
    throw std::invalid_argument("cost: bas_targets must have one entry per constraint");
  if (cfg_.coord_partner) {
    const auto& members = aug.subsystem().members;
    for (std::size_t m = 0; m < members.size(); ++m)
      if (members[m] == *cfg_.coord_partner) partner_offset_ = aug.member_offset(static_cast<int>(m));
    if (partner_offset_ < 0)
      throw std::invalid_argument("cost: coordination partner is not a member of the subsystem");
  }
}

double GoalCoordSubsystemCost::running(Eigen::Ref<const VectorXd> y) const {
  const Eigen::Vector2d pos(y[0], y[1]);
  double q = 0.0;
  if (cfg_.goal_weight != 0.0) q += cfg_.goal_weight * ((pos - cfg_.goal).norm() - cfg_.d_max);
  if (cfg_.coord_weight != 0.0 && partner_offset_ >= 0) {
    const Eigen::Vector2d partner(y[partner_offset_], y[partner_offset_ + 1]);
    q += cfg_.coord_weight * ((pos - partner).norm() - cfg_.d_pair_max);
  }
  if (n_bas_ > 0) {
    if (cfg_.bas_weight != 0.0) {
      double sq = 0.0;
      for (int j = 0; j < n_bas_; ++j) {
        const double d = y[bas_offset_ + j] - cfg_.bas_targets[j];
        sq += d * d;
      }
      q += cfg_.bas_weight * sq;
    }
    if (cfg_.indicator_weight != 0.0) {
      if (cfg_.indicator_mode == IndicatorMode::product) {
        bool all = true;
        for (int j = 0; j < n_bas_ && all; ++j)
          all = y[bas_offset_ + j] > cfg_.indicator_threshold;
        if (all) q += cfg_.indicator_weight;
      } else {
        for (int j = 0; j < n_bas_; ++j)
          if (y[bas_offset_ + j] > cfg_.indicator_threshold) q += cfg_.indicator_weight;
      }
    }
  }
  return q;
}

double GoalCoordSubsystemCost::terminal(Eigen::Ref<const VectorXd> y) const {
  return terminal_cost(term_, cfg_.goal, y);
}

double running_cost(const GoalCoordCost& cfg, const AugmentedJointDynamics& aug,
                    Eigen::Ref<const VectorXd> y) {
  if (y.size() != aug.total_dim())
    throw std::invalid_argument("running_cost: state dimension mismatch");
  return GoalCoordSubsystemCost(aug, cfg).running(y);
}

double terminal_cost(const TerminalCost& cfg, const Eigen::Vector2d& goal,
                     Eigen::Ref<const VectorXd> y) {
  switch (cfg.mode) {
    case TerminalMode::zero:
      return 0.0;
    case TerminalMode::goal_distance:
      return cfg.scale * (Eigen::Vector2d(y[0], y[1]) - goal).norm();
  }
  return 0.0;
}

VectorXd state_cost_gradient_direct(const SubsystemCost& cost, Eigen::Ref<const VectorXd> y,
                                    const std::vector<int>& direct) {
  return cost.gradient_direct(y, direct);
}

}  // namespace sepic
