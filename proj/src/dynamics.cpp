#include "sepic/dynamics.hpp"

#include <cmath>
#include <string>

#include "sepic/rng.hpp"

namespace sepic {
namespace {

// The inverse barrier diverges at the safe-set boundary; the discrete
// integrator must not tunnel through that singularity. On or inside the
// boundary xi saturates at the clamp so a single in-obstacle sample already
// carries an enormous barrier state into the path cost.
double clamp_xi(double xi, double h) {
  if (h <= 0.0) return kBasStateClamp;
  if (xi > kBasStateClamp) return kBasStateClamp;
  if (xi < -kBasStateClamp) return -kBasStateClamp;
  return xi;
}

// dt-coefficient of one BaS given h, grad(h).g and the state offset xi = z + beta0
double bas_drift_core(double gamma, double xi, double h, double grad_dot_g) {
  xi = clamp_xi(xi, h);
  return -xi * xi * (grad_dot_g + gamma * h) + gamma * xi;
}

}  // namespace

Eigen::Vector4d uav_drift(const Eigen::Vector4d& s) {
  return {s[2] * std::cos(s[3]), s[2] * std::sin(s[3]), 0.0, 0.0};
}

Eigen::Matrix<double, 4, 2> uav_control_matrix() {
  Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
  b(2, 0) = 1.0;
  b(3, 1) = 1.0;
  return b;
}

AgentModel make_uav_model(const UnicycleParams& p) {
  if (p.sigma <= 0.0 || p.nu <= 0.0)
    throw std::invalid_argument("uav model: sigma and nu must be positive");
  AgentModel m;
  m.state_dim = 4;
  m.control_dim = 2;
  m.drift = [](Eigen::Ref<const VectorXd> x, double, Eigen::Ref<VectorXd> out) {
    out[0] = x[2] * std::cos(x[3]);
    out[1] = x[2] * std::sin(x[3]);
    out[2] = 0.0;
    out[3] = 0.0;
  };
  m.control_matrix = [](Eigen::Ref<const VectorXd>, Eigen::Ref<MatrixXd> out) {
    out.setZero();
    out(2, 0) = 1.0;
    out(3, 1) = 1.0;
  };
  m.noise_scale = Eigen::Vector2d(p.sigma, p.nu);
  m.constant_control_matrix = true;
  return m;
}

AgentModel make_single_integrator_model(int dim, double noise) {
  AgentModel m;
  m.state_dim = dim;
  m.control_dim = dim;
  m.drift = [](Eigen::Ref<const VectorXd>, double, Eigen::Ref<VectorXd> out) { out.setZero(); };
  m.control_matrix = [](Eigen::Ref<const VectorXd>, Eigen::Ref<MatrixXd> out) {
    out.setIdentity();
  };
  m.noise_scale = VectorXd::Constant(dim, noise);
  m.constant_control_matrix = true;
  return m;
}

double h_value(const BarrierConstraint& c, const Eigen::Vector2d& pos) {
  return (pos - c.center).squaredNorm() - c.radius * c.radius;
}

Eigen::Vector2d h_gradient(const BarrierConstraint& c, const Eigen::Vector2d& pos) {
  return 2.0 * (pos - c.center);
}

BasSpec BasSpec::make(double gamma, std::vector<BarrierConstraint> constraints,
                      const std::optional<std::vector<double>>& beta0_override) {
  if (gamma <= 0.0) throw std::invalid_argument("bas: gamma must be positive");
  BasSpec spec;
  spec.gamma = gamma;
  spec.constraints = std::move(constraints);
  if (beta0_override) {
    if (beta0_override->size() != spec.constraints.size())
      throw std::invalid_argument("bas: beta0 override size mismatch");
    spec.beta0 = *beta0_override;
  } else {
    spec.beta0.reserve(spec.constraints.size());
    for (const auto& c : spec.constraints) {
      const double h0 = h_value(c, Eigen::Vector2d::Zero());
      if (h0 == 0.0)
        throw std::invalid_argument(
            "bas: h_" + std::to_string(c.id) +
            "(0) = 0; obstacle touches the origin, pass an explicit beta0 override");
      spec.beta0.push_back(1.0 / h0);
    }
  }
  return spec;
}

VectorXd bas_init(const BasSpec& spec, Eigen::Ref<const VectorXd> x0) {
  VectorXd z(spec.count());
  const Eigen::Vector2d pos = x0.head<2>();
  for (int j = 0; j < spec.count(); ++j) {
    const double h = h_value(spec.constraints[j], pos);
    if (h <= 0.0)
      throw SafetyViolation("bas_init: start violates constraint " +
                            std::to_string(spec.constraints[j].id) +
                            " (h = " + std::to_string(h) + ")");
    z[j] = 1.0 / h - spec.beta0[j];
  }
  return z;
}

double bas_drift(const BasSpec& spec, int j, Eigen::Ref<const VectorXd> x, double z_j, double t,
                 const AgentModel& agent) {
  VectorXd g(agent.state_dim);
  agent.drift(x, t, g);
  const Eigen::Vector2d pos = x.head<2>();
  const auto& c = spec.constraints[j];
  const double h = h_value(c, pos);
  const double grad_dot_g = h_gradient(c, pos).dot(g.head<2>());
  return bas_drift_core(spec.gamma, z_j + spec.beta0[j], h, grad_dot_g);
}

Eigen::RowVectorXd bas_control_row(const BasSpec& spec, int j, Eigen::Ref<const VectorXd> x,
                                   double z_j, const AgentModel& agent) {
  MatrixXd b(agent.state_dim, agent.control_dim);
  agent.control_matrix(x, b);
  const double xi = clamp_xi(z_j + spec.beta0[j], h_value(spec.constraints[j], x.head<2>()));
  const Eigen::Vector2d grad = h_gradient(spec.constraints[j], x.head<2>());
  return -xi * xi * (grad.transpose() * b.topRows<2>());
}

AugmentedJointDynamics assemble_augmented(const SubsystemSpec& sub,
                                          const std::vector<AgentModel>& members,
                                          const BasSpec& bas) {
  if (members.size() != sub.members.size())
    throw std::invalid_argument("assemble_augmented: one model per member required");
  for (const auto& m : members) {
    if (m.state_dim != members[0].state_dim || m.control_dim != members[0].control_dim)
      throw std::invalid_argument("assemble_augmented: agents must be homogeneous in (M, P)");
    if (m.noise_scale.size() != m.control_dim)
      throw std::invalid_argument("assemble_augmented: noise scale must have length P");
  }
  if (bas.count() > 0 && members[0].state_dim < 2)
    throw std::invalid_argument(
        "assemble_augmented: barrier constraints act on the leading (x, y) coordinates");
  AugmentedJointDynamics aug;
  aug.sub_ = sub;
  aug.models_ = members;
  aug.bas_ = bas;
  aug.state_dim_ = members[0].state_dim;
  aug.control_dim_ = members[0].control_dim;
  aug.total_dim_ = aug.state_dim_ * sub.size() + bas.count();
  return aug;
}

void AugmentedJointDynamics::drift(Eigen::Ref<const VectorXd> y, double t,
                                   Eigen::Ref<VectorXd> out) const {
  const int m_dim = state_dim_;
  // central agent's drift feeds both its own block and every BaS
  out.segment(0, m_dim).setZero();
  models_[0].drift(y.segment(0, m_dim), t, out.segment(0, m_dim));
  if (n_bas() > 0) {
    const Eigen::Vector2d pos = y.head<2>();
    const Eigen::Vector2d g_pos = out.head<2>();
    for (int j = 0; j < n_bas(); ++j) {
      const auto& c = bas_.constraints[j];
      const double h = h_value(c, pos);
      const double grad_dot_g = h_gradient(c, pos).dot(g_pos);
      const double xi = clamp_xi(y[m_dim + j] + bas_.beta0[j], h);
      out[m_dim + j] = -xi * xi * (grad_dot_g + bas_.gamma * h) + bas_.gamma * xi;
    }
  }
  for (int m = 1; m < n_members(); ++m) {
    const int off = member_offset(m);
    out.segment(off, m_dim).setZero();
    models_[m].drift(y.segment(off, m_dim), t, out.segment(off, m_dim));
  }
}

MatrixXd AugmentedJointDynamics::control_matrix(Eigen::Ref<const VectorXd> y) const {
  MatrixXd b = MatrixXd::Zero(total_dim_, total_control_dim());
  MatrixXd block(state_dim_, control_dim_);
  for (int m = 0; m < n_members(); ++m) {
    const int off = member_offset(m);
    models_[m].control_matrix(y.segment(off, state_dim_), block);
    b.block(off, control_offset(m), state_dim_, control_dim_) = block;
    if (m == 0) {
      for (int j = 0; j < n_bas(); ++j) {
        const double xi = clamp_xi(y[state_dim_ + j] + bas_.beta0[j],
                                   h_value(bas_.constraints[j], y.head<2>()));
        const Eigen::Vector2d grad = h_gradient(bas_.constraints[j], y.head<2>());
        b.block(state_dim_ + j, 0, 1, control_dim_) =
            -xi * xi * (grad.transpose() * block.topRows<2>());
      }
    }
  }
  return b;
}

void AugmentedJointDynamics::add_control_effect(Eigen::Ref<const VectorXd> y,
                                                Eigen::Ref<const VectorXd> v,
                                                Eigen::Ref<VectorXd> out) const {
  thread_local MatrixXd block;
  block.resize(state_dim_, control_dim_);
  for (int m = 0; m < n_members(); ++m) {
    const int off = member_offset(m);
    models_[m].control_matrix(y.segment(off, state_dim_), block);
    out.segment(off, state_dim_).noalias() += block * v.segment(control_offset(m), control_dim_);
    if (m == 0 && n_bas() > 0) {
      const Eigen::Vector2d top = block.topRows<2>() * v.segment(0, control_dim_);
      for (int j = 0; j < n_bas(); ++j) {
        const double xi = clamp_xi(y[state_dim_ + j] + bas_.beta0[j],
                                   h_value(bas_.constraints[j], y.head<2>()));
        const Eigen::Vector2d grad = h_gradient(bas_.constraints[j], y.head<2>());
        out[state_dim_ + j] += -xi * xi * grad.dot(top);
      }
    }
  }
}

VectorXd AugmentedJointDynamics::joint_noise_scale() const {
  VectorXd s(total_control_dim());
  for (int m = 0; m < n_members(); ++m)
    s.segment(control_offset(m), control_dim_) = models_[m].noise_scale;
  return s;
}

bool AugmentedJointDynamics::constant_direct_control_matrix() const {
  for (const auto& m : models_)
    if (!m.constant_control_matrix) return false;
  if (n_bas() == 0) return true;
  // constant overall only if every BaS row is structurally zero (non-direct)
  if (!has_partition()) return false;
  for (int j = 0; j < n_bas(); ++j) {
    const int row = bas_offset() + j;
    for (int d : direct_)
      if (d == row) return false;
  }
  return true;
}

void AugmentedJointDynamics::set_partition(std::vector<int> direct, std::vector<int> nondirect) {
  if (static_cast<int>(direct.size() + nondirect.size()) != total_dim_)
    throw std::invalid_argument("partition: index sets must cover the state exactly");
  direct_ = std::move(direct);
  nondirect_ = std::move(nondirect);
}

std::pair<std::vector<int>, std::vector<int>> partition(const AugmentedJointDynamics& aug,
                                                        const std::vector<VectorXd>& probes) {
  if (probes.empty()) throw std::invalid_argument("partition: probe set must be nonempty");
  std::vector<char> nonzero(aug.total_dim(), 0);
  for (const auto& y : probes) {
    const MatrixXd b = aug.control_matrix(y);
    for (int r = 0; r < b.rows(); ++r)
      if (b.row(r).cwiseAbs().maxCoeff() >= 1e-12) nonzero[r] = 1;
  }
  std::vector<int> direct, nondirect;
  for (int r = 0; r < aug.total_dim(); ++r)
    (nonzero[r] ? direct : nondirect).push_back(r);
  return {direct, nondirect};
}

std::vector<VectorXd> default_probe_states(const AugmentedJointDynamics& aug, int count,
                                           std::uint64_t seed) {
  std::vector<VectorXd> probes;
  probes.reserve(count);
  const std::uint64_t key = rng::derive(seed, rng::Domain::probe);
  for (int p = 0; p < count; ++p) {
    VectorXd y(aug.total_dim());
    for (int k = 0; k < aug.total_dim(); ++k)
      y[k] = -25.0 + 50.0 * rng::uniform(rng::combine(key, p, k));
    // keep xi = z + beta0 away from its accidental zero
    for (int j = 0; j < aug.n_bas(); ++j)
      y[aug.bas_offset() + j] = 0.25 + rng::uniform(rng::combine(key, p, 1000 + j));
    probes.push_back(std::move(y));
  }
  return probes;
}

}  // namespace sepic
