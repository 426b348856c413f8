#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sepic/cost.hpp"
#include "sepic/dynamics.hpp"

namespace sepic {

enum class HorizonMode { shrink_to_tf, fixed };

struct SamplerConfig {
  int n_samples = 1000;
  int horizon_steps = 40;  // K
  double eps = 0.05;       // step length (s)
  std::uint64_t seed = 0;
  HorizonMode horizon_mode = HorizonMode::shrink_to_tf;
  int threads = 0;  // 0 = use hardware concurrency
};

struct PathSample {
  MatrixXd states;  // total_dim x (K+1)
  double path_value = 0.0;
  VectorXd initial_control_variable;
  double weight = 0.0;
  bool rejected = false;
};

struct ControlEstimate {
  VectorXd joint_control;  // length P * |members|
  VectorXd local_control;  // central agent block
  double effective_samples = 0.0;
  double min_path_value = 0.0;
  double mean_path_value = 0.0;
  int rejected_samples = 0;
  bool degenerate_warning = false;  // more than half the batch rejected
};

struct DegenerateDiffusion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uncontrolled Euler-Maruyama rollout; deterministic in (cfg.seed, sample_index).
PathSample rollout_uncontrolled(const AugmentedJointDynamics& aug, Eigen::Ref<const VectorXd> y0,
                                const SamplerConfig& cfg, int sample_index, double t0 = 0.0);

// Diffusion of the directly actuated block, H = B_d sigma sigma^T B_d^T.
// Throws DegenerateDiffusion when the smallest eigenvalue is below 1e-12.
MatrixXd h_matrix(const AugmentedJointDynamics& aug, Eigen::Ref<const VectorXd> y);

// Generalized path value of one rollout (terminal, running, log-det and
// drift-mismatch terms).
double path_value(const AugmentedJointDynamics& aug, const SubsystemCost& cost,
                  const PathSample& sample, const SamplerConfig& cfg, double lambda,
                  double t0 = 0.0);

VectorXd initial_control_variable(const AugmentedJointDynamics& aug, const SubsystemCost& cost,
                                  const PathSample& sample, const SamplerConfig& cfg,
                                  double lambda, double t0 = 0.0);

// Softmax over negative path values with min-subtraction; returns normalized
// weights aligned with the input order.
VectorXd softmax_weights(const VectorXd& path_values);

double effective_sample_size(Eigen::Ref<const VectorXd> weights);

// Full estimator: sample uncontrolled rollouts, weight them by path value and
// average the initial control variables. Returns nullopt when every sample
// was rejected (controller failure).
std::optional<ControlEstimate> estimate_control(const AugmentedJointDynamics& aug,
                                                const SubsystemCost& cost,
                                                const ControlWeights& weights,
                                                Eigen::Ref<const VectorXd> y0,
                                                const SamplerConfig& cfg, double t0 = 0.0);

}  // namespace sepic
