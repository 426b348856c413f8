#include "sepic/baselines.hpp"

#include <cmath>
#include <limits>

namespace sepic {

PenaltySubsystemCost::PenaltySubsystemCost(const AugmentedJointDynamics& aug,
                                           PenaltyCostConfig cfg,
                                           std::vector<BarrierConstraint> obstacles,
                                           TerminalCost terminal)
    : GoalCoordSubsystemCost(aug, cfg.base, terminal),
      penalty_weight_(cfg.obstacle_penalty_weight),
      shape_(cfg.violation_shape),
      obstacles_(std::move(obstacles)) {}

double PenaltySubsystemCost::running(Eigen::Ref<const VectorXd> y) const {
  double q = GoalCoordSubsystemCost::running(y);
  if (penalty_weight_ != 0.0) {
    const Eigen::Vector2d pos(y[0], y[1]);
    for (const auto& c : obstacles_) {
      const double h = h_value(c, pos);
      if (shape_ == ViolationShape::indicator) {
        if (h <= 0.0) q += penalty_weight_;
      } else {
        q += penalty_weight_ * std::max(0.0, -h);
      }
    }
  }
  return q;
}

std::optional<ControlEstimate> penalty_pic_control(const AugmentedJointDynamics& unaugmented,
                                                   const PenaltySubsystemCost& cost,
                                                   const ControlWeights& weights,
                                                   Eigen::Ref<const VectorXd> x0,
                                                   const SamplerConfig& cfg, double t0) {
  if (unaugmented.n_bas() != 0)
    throw std::invalid_argument("penalty_pic_control: expects unaugmented joint dynamics");
  return estimate_control(unaugmented, cost, weights, x0, cfg, t0);
}

HocbfRow hocbf_constraint_row(const BarrierConstraint& obstacle, const Eigen::Vector4d& state,
                              double k1, double k2) {
  const Eigen::Vector2d rel = state.head<2>() - obstacle.center;
  const double v = state[2];
  const double phi = state[3];
  const Eigen::Vector2d heading(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d normal(-std::sin(phi), std::cos(phi));

  const double h = rel.squaredNorm() - obstacle.radius * obstacle.radius;
  const double h_dot = 2.0 * rel.dot(v * heading);
  // hddot = 2 v^2 + 2 rel.heading u + 2 v rel.normal w
  HocbfRow out;
  out.row = {2.0 * rel.dot(heading), 2.0 * v * rel.dot(normal)};
  out.rhs = -(2.0 * v * v + (k1 + k2) * h_dot + k1 * k2 * h);
  return out;
}

namespace {

bool feasible(const Eigen::Vector2d& u, const std::vector<HocbfRow>& rows, double tol) {
  for (const auto& r : rows)
    if (r.row.dot(u) < r.rhs - tol) return false;
  return true;
}

void append_box_rows(const CbfFilterConfig& cfg, std::vector<HocbfRow>& rows) {
  if (cfg.u_min) {
    rows.push_back({{1.0, 0.0}, (*cfg.u_min)[0]});
    rows.push_back({{0.0, 1.0}, (*cfg.u_min)[1]});
  }
  if (cfg.u_max) {
    rows.push_back({{-1.0, 0.0}, -(*cfg.u_max)[0]});
    rows.push_back({{0.0, -1.0}, -(*cfg.u_max)[1]});
  }
}

// slack-penalized fallback: min |u - u_base|^2 + w sum max(0, rhs - a.u)^2
Eigen::Vector2d soft_solve(const Eigen::Vector2d& u_base, const std::vector<HocbfRow>& rows,
                           double w) {
  Eigen::Vector2d u = u_base;
  for (int iter = 0; iter < 64; ++iter) {
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    Eigen::Vector2d b = u_base;
    for (const auto& r : rows) {
      if (r.row.dot(u) < r.rhs) {
        a += w * r.row * r.row.transpose();
        b += w * r.rhs * r.row;
      }
    }
    const Eigen::Vector2d next = a.ldlt().solve(b);
    if ((next - u).norm() < 1e-12) return next;
    u = next;
  }
  return u;
}

}  // namespace

CbfFilterResult cbf_filter(const Eigen::Vector2d& u_base, const Eigen::Vector4d& state,
                           const std::vector<BarrierConstraint>& obstacles,
                           const CbfFilterConfig& cfg) {
  std::vector<HocbfRow> rows;
  rows.reserve(obstacles.size() + 4);
  for (const auto& obs : obstacles) rows.push_back(hocbf_constraint_row(obs, state, cfg.k1, cfg.k2));
  append_box_rows(cfg, rows);

  constexpr double tol = 1e-9;
  if (feasible(u_base, rows, tol)) return {u_base, false};

  // active-set enumeration: single-constraint projections and pairwise vertices
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best = u_base;
  bool found = false;
  auto consider = [&](const Eigen::Vector2d& u) {
    if (!feasible(u, rows, tol)) return;
    const double c = (u - u_base).squaredNorm();
    if (c < best_cost) {
      best_cost = c;
      best = u;
      found = true;
    }
  };
  for (const auto& r : rows) {
    const double nn = r.row.squaredNorm();
    if (nn < 1e-16) continue;
    const double gap = r.rhs - r.row.dot(u_base);
    if (gap > 0.0) consider(u_base + (gap / nn) * r.row);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      Eigen::Matrix2d a;
      a.row(0) = rows[i].row;
      a.row(1) = rows[j].row;
      if (std::abs(a.determinant()) < 1e-12) continue;
      consider(a.inverse() * Eigen::Vector2d(rows[i].rhs, rows[j].rhs));
    }
  }
  if (found) return {best, false};
  return {soft_solve(u_base, rows, cfg.slack_weight), true};
}

}  // namespace sepic
