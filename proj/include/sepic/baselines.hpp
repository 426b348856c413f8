#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sepic/cost.hpp"
#include "sepic/dynamics.hpp"
#include "sepic/pic.hpp"

namespace sepic {

enum class ViolationShape { indicator, hinge };

// Comparison controller 1: plain path-integral control on the unaugmented
// joint dynamics, with constraint violations penalized in the state cost.
struct PenaltyCostConfig {
  GoalCoordCost base;              // BaS terms unused (no barrier states)
  double obstacle_penalty_weight = 0.0;
  ViolationShape violation_shape = ViolationShape::indicator;
};

// Goal/coordination cost plus an obstacle-violation penalty on the central
// agent's position.
class PenaltySubsystemCost : public GoalCoordSubsystemCost {
 public:
  PenaltySubsystemCost(const AugmentedJointDynamics& aug, PenaltyCostConfig cfg,
                       std::vector<BarrierConstraint> obstacles, TerminalCost terminal = {});

  double running(Eigen::Ref<const VectorXd> y) const override;

 private:
  double penalty_weight_;
  ViolationShape shape_;
  std::vector<BarrierConstraint> obstacles_;
};

std::optional<ControlEstimate> penalty_pic_control(const AugmentedJointDynamics& unaugmented,
                                                   const PenaltySubsystemCost& cost,
                                                   const ControlWeights& weights,
                                                   Eigen::Ref<const VectorXd> x0,
                                                   const SamplerConfig& cfg, double t0 = 0.0);

// Comparison controller 2: high-order CBF quadratic-program filter over a
// baseline control. Circular position constraints have relative degree 2
// under the UAV dynamics, hence the second-order form
// d/dt(hdot + k1 h) + k2 (hdot + k1 h) >= 0.
struct CbfFilterConfig {
  double k1 = 0.5;
  double k2 = 1.0;
  double slack_weight = 100.0;
  std::optional<Eigen::Vector2d> u_min;
  std::optional<Eigen::Vector2d> u_max;
};

struct HocbfRow {
  Eigen::Vector2d row;  // coefficients on (u, w)
  double rhs;           // constraint is row . u >= rhs
};

HocbfRow hocbf_constraint_row(const BarrierConstraint& obstacle, const Eigen::Vector4d& state,
                              double k1, double k2);

struct CbfFilterResult {
  Eigen::Vector2d control;
  bool infeasible = false;  // hard QP infeasible, slack relaxation used
};

CbfFilterResult cbf_filter(const Eigen::Vector2d& u_base, const Eigen::Vector4d& state,
                           const std::vector<BarrierConstraint>& obstacles,
                           const CbfFilterConfig& cfg);

}  // namespace sepic
