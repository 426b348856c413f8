#include <cmath>

#include "doctest.h"
#include "sepic/cost.hpp"
#include "sepic/dynamics.hpp"
#include "sepic/pic.hpp"
#include "sepic/rng.hpp"
#include "sepic/topology.hpp"
#include "sepic/verify.hpp"

using namespace sepic;

namespace {

struct ZeroCost : SubsystemCost {
  double running(Eigen::Ref<const VectorXd>) const override { return 0.0; }
  double terminal(Eigen::Ref<const VectorXd>) const override { return 0.0; }
};

AugmentedJointDynamics single_agent(const AgentModel& model, const BasSpec& bas = {}) {
  const auto subs = factorize(AgentGraph::fully_connected(1), model.state_dim);
  auto aug = assemble_augmented(subs[0], {model}, bas);
  auto [d, n] = partition(aug, default_probe_states(aug));
  aug.set_partition(std::move(d), std::move(n));
  return aug;
}

AugmentedJointDynamics three_uav(double sigma = 0.1, double nu = 0.05) {
  const auto subs = factorize(AgentGraph::fully_connected(3), 4);
  const AgentModel uav = make_uav_model({sigma, nu});
  const std::vector<BarrierConstraint> obstacles{
      {{17.0, 40.0}, 8.0, 1}, {{22.0, 16.0}, 7.0, 2}, {{35.0, 30.0}, 5.0, 3}};
  auto aug = assemble_augmented(subs[0], {uav, uav, uav}, BasSpec::make(0.5, obstacles));
  auto [d, n] = partition(aug, default_probe_states(aug));
  aug.set_partition(std::move(d), std::move(n));
  return aug;
}

VectorXd scenario1_y0(const AugmentedJointDynamics& aug) {
  VectorXd y = VectorXd::Zero(aug.total_dim());
  y.segment<4>(0) << 5, 5, 0, 0;
  y.segment<3>(4) = bas_init(aug.bas(), y.segment<4>(0));
  y.segment<4>(7) << 5, 45, 0, 0;
  y.segment<4>(11) << 5, 25, 0, 0;
  return y;
}

}  // namespace

TEST_CASE("uncontrolled rollouts are deterministic in (seed, sample)") {
  auto aug = three_uav();
  const VectorXd y0 = scenario1_y0(aug);
  SamplerConfig cfg;
  cfg.horizon_steps = 20;
  cfg.eps = 0.05;
  cfg.seed = 99;
  const auto a = rollout_uncontrolled(aug, y0, cfg, 7);
  const auto b = rollout_uncontrolled(aug, y0, cfg, 7);
  CHECK(a.states == b.states);
  CHECK(a.states.col(0) == y0);
  const auto c = rollout_uncontrolled(aug, y0, cfg, 8);
  CHECK(a.states != c.states);
}

TEST_CASE("degenerate rollouts") {
  // zero drift and zero control matrix: the path never moves
  AgentModel inert;
  inert.state_dim = 2;
  inert.control_dim = 2;
  inert.drift = [](Eigen::Ref<const VectorXd>, double, Eigen::Ref<VectorXd> out) {
    out.setZero();
  };
  inert.control_matrix = [](Eigen::Ref<const VectorXd>, Eigen::Ref<MatrixXd> out) {
    out.setZero();
  };
  inert.noise_scale = VectorXd::Constant(2, 3.0);
  inert.constant_control_matrix = true;
  auto aug = single_agent(inert);
  VectorXd y0(2);
  y0 << 1.5, -2.5;
  SamplerConfig cfg;
  cfg.horizon_steps = 5;
  cfg.eps = 0.1;
  cfg.seed = 4;
  const auto path = rollout_uncontrolled(aug, y0, cfg, 0);
  for (int k = 0; k <= 5; ++k) CHECK(path.states.col(k) == y0);

  // zero noise: one Euler step of the uav drift
  AgentModel uav = make_uav_model({0.1, 0.05});
  uav.noise_scale.setZero();
  auto aug_uav = single_agent(uav);
  VectorXd x0(4);
  x0 << 0, 0, 1, 0;
  SamplerConfig one;
  one.horizon_steps = 1;
  one.eps = 0.05;
  const auto step_path = rollout_uncontrolled(aug_uav, x0, one, 0);
  CHECK(step_path.states(0, 1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(step_path.states(1, 1) == 0.0);
  CHECK(step_path.states(2, 1) == 1.0);
}

TEST_CASE("h matrix of the 3-uav subsystem") {
  auto aug = three_uav();
  const MatrixXd h = h_matrix(aug, scenario1_y0(aug));
  REQUIRE(h.rows() == 6);
  VectorXd expected(6);
  expected << 0.01, 0.0025, 0.01, 0.0025, 0.01, 0.0025;
  CHECK(h.isApprox(MatrixXd(expected.asDiagonal()), 1e-14));
  const double log_det = std::log(h.determinant());
  CHECK(log_det == doctest::Approx(3.0 * (std::log(0.01) + std::log(0.0025))).epsilon(1e-10));
  CHECK(log_det == doctest::Approx(-31.79).epsilon(1e-3));
}

TEST_CASE("h matrix is the identity for a unit-noise single integrator") {
  auto aug = single_agent(make_single_integrator_model(2, 1.0));
  VectorXd y0 = VectorXd::Zero(2);
  CHECK(h_matrix(aug, y0).isIdentity(1e-15));
}

TEST_CASE("an actuated barrier row makes the direct diffusion singular") {
  // B_d = [I2; (-4, 0)] has rank 2, so the 3x3 Gram matrix cannot be PD
  const AgentModel si = make_single_integrator_model(2, 1.0);
  auto aug = single_agent(si, BasSpec::make(0.5, {BarrierConstraint{{0.0, 0.0}, 1.0, 1}}));
  REQUIRE(aug.direct_indices().size() == 3);
  VectorXd y0(3);
  y0 << 8.0, 0.0, 0.5 - aug.bas().beta0[0];

  const MatrixXd b = aug.control_matrix(y0);
  MatrixXd gram = b * b.transpose();  // sigma = I
  MatrixXd expected(3, 3);
  expected << 1, 0, -4, 0, 1, 0, -4, 0, 16;
  CHECK(gram.isApprox(expected, 1e-12));
  CHECK_THROWS_AS(h_matrix(aug, y0), DegenerateDiffusion);
}

TEST_CASE("path value on hand-checkable instances") {
  auto aug = single_agent(make_single_integrator_model(2, 1.0));
  ZeroCost cost;

  SamplerConfig cfg;
  cfg.horizon_steps = 1;
  cfg.eps = 0.1;

  PathSample still;
  still.states = MatrixXd::Zero(2, 2);  // alpha = 0, H = I, q = phi = 0
  CHECK(path_value(aug, cost, still, cfg, 0.1) == 0.0);

  PathSample moved;
  moved.states.resize(2, 2);
  moved.states.col(0) << 0.0, 0.0;
  moved.states.col(1) << 0.1, 0.0;  // alpha = (1, 0)
  CHECK(path_value(aug, cost, moved, cfg, 0.1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("path value matches the independent oracle on random instances") {
  const auto res = pathvalue_suite();
  INFO(res.detail);
  CHECK(res.pass);
  CHECK(res.measured < 1e-12);
}

TEST_CASE("initial control variable") {
  // zero noise, zero drift, constant cost: both terms vanish
  AgentModel quiet = make_single_integrator_model(2, 1.0);
  auto aug = single_agent(quiet);
  ZeroCost zero;
  SamplerConfig cfg;
  cfg.horizon_steps = 1;
  cfg.eps = 0.1;
  PathSample still;
  still.states = MatrixXd::Zero(2, 2);
  CHECK(initial_control_variable(aug, zero, still, cfg, 0.1).isZero(1e-12));

  // H = 2 I and alpha = (4, 0): whitened innovation (2, 0)
  auto aug2 = single_agent(make_single_integrator_model(2, std::sqrt(2.0)));
  PathSample kick;
  kick.states.resize(2, 2);
  kick.states.col(0) << 0.0, 0.0;
  kick.states.col(1) << 0.4, 0.0;
  const VectorXd u = initial_control_variable(aug2, zero, kick, cfg, 0.1);
  CHECK(u[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(0.0).epsilon(1e-12));

  // uav scenario: the state cost has no direct gradient, so u-tilde is H^-1 alpha
  auto uav = three_uav();
  const VectorXd y0 = scenario1_y0(uav);
  SamplerConfig roll;
  roll.horizon_steps = 4;
  roll.eps = 0.05;
  roll.seed = 31;
  const PathSample sample = rollout_uncontrolled(uav, y0, roll, 2);
  GoalCoordCost gcfg;
  gcfg.goal_weight = 3.5;
  gcfg.goal = {45, 25};
  gcfg.d_max = 44.7;
  GoalCoordSubsystemCost gcost(uav, gcfg);
  const MatrixXd h = h_matrix(uav, y0);
  VectorXd alpha(6);
  const auto& direct = uav.direct_indices();
  VectorXd g(uav.total_dim());
  uav.drift(y0, 0.0, g);
  for (int r = 0; r < 6; ++r)
    alpha[r] = (sample.states(direct[r], 1) - sample.states(direct[r], 0)) / roll.eps -
               g[direct[r]];
  const VectorXd expected = h.llt().solve(alpha);
  CHECK(initial_control_variable(uav, gcost, sample, roll, 0.1).isApprox(expected, 1e-9));
}

TEST_CASE("softmax weights") {
  VectorXd one(1);
  one << 12.3;
  CHECK(softmax_weights(one)[0] == 1.0);

  VectorXd pair(2);
  pair << 4.2, 4.2;
  const VectorXd w = softmax_weights(pair);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 0.5);

  for (int trial = 0; trial < 10; ++trial) {
    VectorXd values(64);
    for (int k = 0; k < 64; ++k)
      values[k] = 200.0 * rng::uniform(rng::combine(21, trial, k)) - 100.0;
    const VectorXd weights = softmax_weights(values);
    CHECK(std::abs(weights.sum() - 1.0) <= 1e-12);
    CHECK(weights.minCoeff() >= 0.0);
    CHECK(weights.maxCoeff() <= 1.0);
  }
}

TEST_CASE("softmax weights are bitwise shift-invariant on representable inputs") {
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd values(256);
    for (int k = 0; k < 256; ++k) {
      // dyadic grid keeps the shifted sums exactly representable
      const double raw = 100.0 * rng::uniform(rng::combine(22, trial, k));
      values[k] = std::round(raw * 1048576.0) / 1048576.0;
    }
    const VectorXd base = softmax_weights(values);
    for (const double shift : {1024.0, -512.0, 65536.0}) {
      const VectorXd shifted = softmax_weights(values.array() + shift);
      CHECK((shifted.array() == base.array()).all());
    }
  }
}

TEST_CASE("effective sample size") {
  CHECK(effective_sample_size(VectorXd::Constant(10, 0.1)) == doctest::Approx(10.0));
  VectorXd onehot = VectorXd::Zero(5);
  onehot[3] = 1.0;
  CHECK(effective_sample_size(onehot) == doctest::Approx(1.0));
  VectorXd mixed(3);
  mixed << 0.5, 0.25, 0.25;
  CHECK(effective_sample_size(mixed) == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("estimate with a single sample reduces to the projected u-tilde") {
  auto aug = three_uav();
  const VectorXd y0 = scenario1_y0(aug);
  GoalCoordCost gcfg;
  gcfg.goal_weight = 3.5;
  gcfg.goal = {45, 25};
  gcfg.d_max = 44.7;
  GoalCoordSubsystemCost cost(aug, gcfg);
  const ControlWeights weights = cancellation_weights(aug.joint_noise_scale(), 0.1);

  SamplerConfig cfg;
  cfg.n_samples = 1;
  cfg.horizon_steps = 5;
  cfg.eps = 0.05;
  cfg.seed = 17;
  const auto est = estimate_control(aug, cost, weights, y0, cfg);
  REQUIRE(est.has_value());
  CHECK(est->effective_samples == doctest::Approx(1.0));
  CHECK(est->rejected_samples == 0);

  const PathSample sample = rollout_uncontrolled(aug, y0, cfg, 0);
  const VectorXd utilde = initial_control_variable(aug, cost, sample, cfg, weights.lambda);
  MatrixXd bd(6, 6);
  const MatrixXd b = aug.control_matrix(y0);
  for (int r = 0; r < 6; ++r) bd.row(r) = b.row(aug.direct_indices()[r]);
  const VectorXd expected =
      weights.lambda * weights.r_inv_diag().asDiagonal() * (bd.transpose() * utilde);
  CHECK(est->joint_control.isApprox(expected, 1e-12));
  CHECK(est->local_control == est->joint_control.head(2));
}

TEST_CASE("estimates are independent of the worker count") {
  auto aug = three_uav();
  const VectorXd y0 = scenario1_y0(aug);
  GoalCoordCost gcfg;
  gcfg.goal_weight = 3.5;
  gcfg.goal = {45, 25};
  gcfg.d_max = 44.7;
  GoalCoordSubsystemCost cost(aug, gcfg);
  const ControlWeights weights = cancellation_weights(aug.joint_noise_scale(), 0.1);

  SamplerConfig cfg;
  cfg.n_samples = 200;
  cfg.horizon_steps = 10;
  cfg.eps = 0.05;
  cfg.seed = 5;
  cfg.threads = 1;
  const auto serial = estimate_control(aug, cost, weights, y0, cfg);
  cfg.threads = 2;
  const auto threaded = estimate_control(aug, cost, weights, y0, cfg);
  cfg.threads = 7;
  const auto uneven = estimate_control(aug, cost, weights, y0, cfg);
  REQUIRE(serial.has_value());
  REQUIRE(threaded.has_value());
  REQUIRE(uneven.has_value());
  CHECK((serial->joint_control.array() == threaded->joint_control.array()).all());
  CHECK((serial->joint_control.array() == uneven->joint_control.array()).all());
  CHECK(serial->effective_samples == threaded->effective_samples);
  CHECK(serial->min_path_value == uneven->min_path_value);
}

TEST_CASE("all-rejected batches signal controller failure") {
  AgentModel runaway;
  runaway.state_dim = 1;
  runaway.control_dim = 1;
  runaway.drift = [](Eigen::Ref<const VectorXd> x, double, Eigen::Ref<VectorXd> out) {
    out[0] = 1e300 * (x[0] + 1.0);
  };
  runaway.control_matrix = [](Eigen::Ref<const VectorXd>, Eigen::Ref<MatrixXd> out) {
    out.setIdentity();
  };
  runaway.noise_scale = VectorXd::Constant(1, 1.0);
  auto aug = single_agent(runaway);
  ZeroCost cost;
  const ControlWeights weights = cancellation_weights(aug.joint_noise_scale(), 1.0);
  SamplerConfig cfg;
  cfg.n_samples = 16;
  cfg.horizon_steps = 4;
  cfg.eps = 1.0;
  VectorXd y0(1);
  y0 << 1.0;
  CHECK_FALSE(estimate_control(aug, cost, weights, y0, cfg).has_value());
}

TEST_CASE("mostly-rejected batches carry a degeneracy warning") {
  auto aug = single_agent(make_single_integrator_model(1, 1.0));
  struct HalfPlane : SubsystemCost {
    double running(Eigen::Ref<const VectorXd> y) const override {
      return y[0] > -1.9 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    double terminal(Eigen::Ref<const VectorXd>) const override { return 0.0; }
  } cost;
  const ControlWeights weights = cancellation_weights(aug.joint_noise_scale(), 1.0);
  SamplerConfig cfg;
  cfg.n_samples = 400;
  cfg.horizon_steps = 3;
  cfg.eps = 1.0;
  cfg.seed = 12;
  VectorXd y0(1);
  y0 << -2.0;  // most paths drift above -1.9 and pick up an infinite cost
  const auto est = estimate_control(aug, cost, weights, y0, cfg);
  REQUIRE(est.has_value());
  CHECK(est->rejected_samples > 200);
  CHECK(est->degenerate_warning);
}

TEST_CASE("estimator approaches the lq optimum as the batch grows") {
  constexpr double sigma = 0.5;
  constexpr double lambda = 20.0;
  constexpr double qx = 80.0;
  auto aug = single_agent(make_single_integrator_model(1, sigma));
  struct Quad : SubsystemCost {
    double running(Eigen::Ref<const VectorXd> y) const override { return 0.5 * 80.0 * y[0] * y[0]; }
    double terminal(Eigen::Ref<const VectorXd>) const override { return 0.0; }
  } cost;
  const ControlWeights weights = cancellation_weights(aug.joint_noise_scale(), lambda);
  const double gain = riccati_gain(qx, weights.r_diag[0], 1.0);

  VectorXd y0(1);
  y0 << 1.5;
  const double exact = -gain * 1.5;

  SamplerConfig cfg;
  cfg.horizon_steps = 10;
  cfg.eps = 0.1;
  std::vector<double> err_small, err_large;
  for (int s = 0; s < 20; ++s) {
    cfg.seed = rng::combine(777, s);
    cfg.n_samples = 1000;
    err_small.push_back(std::abs(estimate_control(aug, cost, weights, y0, cfg)->local_control[0] -
                                 exact));
    cfg.n_samples = 100000;
    err_large.push_back(std::abs(estimate_control(aug, cost, weights, y0, cfg)->local_control[0] -
                                 exact));
  }
  std::sort(err_small.begin(), err_small.end());
  std::sort(err_large.begin(), err_large.end());
  CHECK(err_large[10] < err_small[10]);
}
