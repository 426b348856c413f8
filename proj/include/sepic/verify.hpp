#pragma once

#include <string>
#include <vector>

#include "sepic/pic.hpp"
#include "sepic/sim.hpp"

namespace sepic {

// Verification-only code: independent re-implementations used to check the
// production path, never called by it.

// Term-by-term re-evaluation of the generalized path value with hand-rolled
// linear algebra (Gauss-Jordan inverse, elimination determinant).
double path_value_oracle(const AugmentedJointDynamics& aug, const SubsystemCost& cost,
                         const PathSample& sample, const SamplerConfig& cfg, double lambda,
                         double t0 = 0.0);

// Finite-horizon scalar LQR gain for dx = u dt + sigma dw with running cost
// 0.5 qx x^2 + 0.5 R u^2 and zero terminal cost: u*(x, 0) = -gain * x.
// Integrated backward with RK4.
double riccati_gain(double qx, double r_weight, double horizon, int steps = 20000);

struct SuiteResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double required = 0.0;
  std::string detail;
};

SuiteResult manifold_suite(const ScenarioConfig& cfg);
SuiteResult gradient_suite();
SuiteResult pathvalue_suite();
SuiteResult lq_suite(int n_samples = 100000, int n_seeds = 5);

// suite: manifold | gradients | pathvalue-oracle | lq-sanity | all
std::vector<SuiteResult> run_verification(const std::string& suite, const ScenarioConfig& cfg);

}  // namespace sepic
