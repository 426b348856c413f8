#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sepic/dynamics.hpp"

namespace sepic {

// Control weights tied to the noise through the cancellation condition
// sigma_bar sigma_bar^T R_bar = lambda I.
struct ControlWeights {
  double lambda = 1.0;
  VectorXd r_diag;  // diagonal of R_bar, stacked over members

  VectorXd r_inv_diag() const { return r_diag.cwiseInverse(); }
};

ControlWeights cancellation_weights(Eigen::Ref<const VectorXd> joint_noise_scale, double lambda);

enum class IndicatorMode { product, sum };

// Per-subsystem running-cost weights in the goal / coordination / barrier
// family used by both scenarios.
struct GoalCoordCost {
  double goal_weight = 0.0;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double coord_weight = 0.0;
  std::optional<int> coord_partner;  // agent id
  double d_max = 0.0;
  double d_pair_max = 0.0;
  double bas_weight = 0.0;
  VectorXd bas_targets;
  double indicator_weight = 0.0;
  double indicator_threshold = 0.01;
  IndicatorMode indicator_mode = IndicatorMode::product;
};

struct EpisodeConstants {
  VectorXd d_max;        // per agent
  MatrixXd d_pair_max;   // symmetric, per agent pair
};

EpisodeConstants freeze_episode_constants(const std::vector<VectorXd>& starts,
                                          const std::vector<Eigen::Vector2d>& goals);

enum class TerminalMode { zero, goal_distance };

struct TerminalCost {
  TerminalMode mode = TerminalMode::zero;
  double scale = 0.0;
};

// State-cost model over the augmented joint state of one subsystem.
class SubsystemCost {
 public:
  virtual ~SubsystemCost() = default;
  virtual double running(Eigen::Ref<const VectorXd> y) const = 0;
  virtual double terminal(Eigen::Ref<const VectorXd> y) const = 0;

  // central finite differences over the directly actuated coordinates;
  // the indicator term is piecewise constant and drops out away from the
  // threshold
  VectorXd gradient_direct(Eigen::Ref<const VectorXd> y, const std::vector<int>& direct) const;
};

// Goal/coordination/BaS cost evaluated on a subsystem's augmented layout.
class GoalCoordSubsystemCost : public SubsystemCost {
 public:
  GoalCoordSubsystemCost(const AugmentedJointDynamics& aug, GoalCoordCost cfg,
                         TerminalCost terminal = {});

  double running(Eigen::Ref<const VectorXd> y) const override;
  double terminal(Eigen::Ref<const VectorXd> y) const override;

  const GoalCoordCost& config() const { return cfg_; }

 protected:
  GoalCoordCost cfg_;
  TerminalCost term_;
  int n_bas_ = 0;
  int bas_offset_ = 0;
  int partner_offset_ = -1;  // offset of partner position block, -1 if none
};

// Free-function forms of the cost operations.
double running_cost(const GoalCoordCost& cfg, const AugmentedJointDynamics& aug,
                    Eigen::Ref<const VectorXd> y);
double terminal_cost(const TerminalCost& cfg, const Eigen::Vector2d& goal,
                     Eigen::Ref<const VectorXd> y);
VectorXd state_cost_gradient_direct(const SubsystemCost& cost, Eigen::Ref<const VectorXd> y,
                                    const std::vector<int>& direct);

}  // namespace sepic
