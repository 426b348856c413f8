#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sepic/topology.hpp"

namespace sepic {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-agent Ito model dx = g(x,t) dt + B(x) [u dt + sigma dw].
struct AgentModel {
  int state_dim = 0;   // M
  int control_dim = 0; // P
  std::function<void(Eigen::Ref<const VectorXd>, double, Eigen::Ref<VectorXd>)> drift;
  std::function<void(Eigen::Ref<const VectorXd>, Eigen::Ref<MatrixXd>)> control_matrix;
  VectorXd noise_scale;  // diagonal of sigma, length P
  bool constant_control_matrix = false;
};

struct UnicycleParams {
  double sigma = 0.1;  // forward-acceleration noise scale
  double nu = 0.05;    // angular-rate noise scale
};

// UAV state is (x, y, v, phi); controls are (forward accel, angular rate).
Eigen::Vector4d uav_drift(const Eigen::Vector4d& state);
Eigen::Matrix<double, 4, 2> uav_control_matrix();
AgentModel make_uav_model(const UnicycleParams& p);

// Agent with B = identity and zero drift; used by tests and sanity checks.
AgentModel make_single_integrator_model(int dim, double noise);

// Circular safe-set constraint h(x) = |pos - center|^2 - r^2, safe where h > 0.
struct BarrierConstraint {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  int id = 0;
};

double h_value(const BarrierConstraint& c, const Eigen::Vector2d& pos);
Eigen::Vector2d h_gradient(const BarrierConstraint& c, const Eigen::Vector2d& pos);

// Barrier-state parameters for one agent: inverse barrier beta = 1/h with
// return rate gamma. beta0[j] = 1/h_j(0) unless overridden.
struct BasSpec {
  double gamma = 0.5;
  std::vector<BarrierConstraint> constraints;
  std::vector<double> beta0;

  int count() const { return static_cast<int>(constraints.size()); }

  static BasSpec make(double gamma, std::vector<BarrierConstraint> constraints,
                      const std::optional<std::vector<double>>& beta0_override = std::nullopt);
};

// Thrown when an agent is asked to start on or inside an obstacle.
struct SafetyViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// |z + beta0| is clamped at this magnitude inside the BaS dynamics so that
// rollouts entering an obstacle stay finite; such paths pick up enormous
// state cost and vanish from the softmax.
inline constexpr double kBasStateClamp = 1e6;

VectorXd bas_init(const BasSpec& spec, Eigen::Ref<const VectorXd> x0);
double bas_drift(const BasSpec& spec, int j, Eigen::Ref<const VectorXd> x, double z_j,
                 double t, const AgentModel& agent);
Eigen::RowVectorXd bas_control_row(const BasSpec& spec, int j, Eigen::Ref<const VectorXd> x,
                                   double z_j, const AgentModel& agent);

// BaS-augmented joint dynamics of one subsystem: state layout is
// [x_central; z; x_neighbor...], controls are stacked per member.
class AugmentedJointDynamics {
 public:
  AugmentedJointDynamics() = default;

  const SubsystemSpec& subsystem() const { return sub_; }
  const BasSpec& bas() const { return bas_; }
  const AgentModel& model(int member) const { return models_[member]; }
  int n_members() const { return sub_.size(); }
  int state_dim() const { return state_dim_; }
  int control_dim() const { return control_dim_; }
  int n_bas() const { return bas_.count(); }
  int total_dim() const { return total_dim_; }
  int total_control_dim() const { return control_dim_ * sub_.size(); }

  // offset of member m's physical state block in the augmented state
  int member_offset(int m) const { return m == 0 ? 0 : state_dim_ + n_bas() + (m - 1) * state_dim_; }
  int bas_offset() const { return state_dim_; }
  int control_offset(int m) const { return m * control_dim_; }

  void drift(Eigen::Ref<const VectorXd> y, double t, Eigen::Ref<VectorXd> out) const;
  MatrixXd control_matrix(Eigen::Ref<const VectorXd> y) const;
  // out += B(y) * v, exploiting the block structure (hot path)
  void add_control_effect(Eigen::Ref<const VectorXd> y, Eigen::Ref<const VectorXd> v,
                          Eigen::Ref<VectorXd> out) const;
  VectorXd joint_noise_scale() const;  // diagonal of sigma_bar

  bool constant_direct_control_matrix() const;

  const std::vector<int>& direct_indices() const { return direct_; }
  const std::vector<int>& nondirect_indices() const { return nondirect_; }
  bool has_partition() const { return !direct_.empty() || !nondirect_.empty(); }
  void set_partition(std::vector<int> direct, std::vector<int> nondirect);

  friend AugmentedJointDynamics assemble_augmented(const SubsystemSpec&,
                                                   const std::vector<AgentModel>&,
                                                   const BasSpec&);

 private:
  SubsystemSpec sub_;
  std::vector<AgentModel> models_;
  BasSpec bas_;
  int state_dim_ = 0;
  int control_dim_ = 0;
  int total_dim_ = 0;
  std::vector<int> direct_;
  std::vector<int> nondirect_;
};

AugmentedJointDynamics assemble_augmented(const SubsystemSpec& sub,
                                          const std::vector<AgentModel>& members,
                                          const BasSpec& bas);

// Structural partition by probing: a row is non-direct iff its control-matrix
// row vanishes (|entry| < 1e-12) at every probe state.
std::pair<std::vector<int>, std::vector<int>> partition(const AugmentedJointDynamics& aug,
                                                        const std::vector<VectorXd>& probes);
std::vector<VectorXd> default_probe_states(const AugmentedJointDynamics& aug, int count = 16,
                                           std::uint64_t seed = 0x50524f4245ULL);

}  // namespace sepic
