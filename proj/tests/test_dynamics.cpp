#include <cmath>

#include "doctest.h"
#include "sepic/dynamics.hpp"
#include "sepic/rng.hpp"
#include "sepic/topology.hpp"

using namespace sepic;

namespace {

const BarrierConstraint h1{{17.0, 40.0}, 8.0, 1};

AugmentedJointDynamics three_uav_subsystem(int n_bas) {
  const auto g = AgentGraph::fully_connected(3);
  const auto subs = factorize(g, 4);
  const AgentModel uav = make_uav_model({0.1, 0.05});
  std::vector<BarrierConstraint> constraints;
  const std::vector<BarrierConstraint> all{{{17.0, 40.0}, 8.0, 1},
                                           {{22.0, 16.0}, 7.0, 2},
                                           {{35.0, 30.0}, 5.0, 3}};
  for (int j = 0; j < n_bas; ++j) constraints.push_back(all[j]);
  const BasSpec bas = n_bas > 0 ? BasSpec::make(0.5, constraints) : BasSpec{};
  return assemble_augmented(subs[0], {uav, uav, uav}, bas);
}

}  // namespace

TEST_CASE("uav drift") {
  CHECK(uav_drift({0, 0, 2, 0}) == Eigen::Vector4d{2, 0, 0, 0});
  CHECK(uav_drift({5, 5, 0, 1.2}).isZero(0.0));
  const auto d = uav_drift({1, 1, 1, M_PI_2});
  CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(1.0));
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 0.0);
}

TEST_CASE("uav control matrix actuates only (v, phi)") {
  const auto b = uav_control_matrix();
  Eigen::Matrix<double, 4, 2> expected;
  expected << 0, 0, 0, 0, 1, 0, 0, 1;
  CHECK(b == expected);
  CHECK(Eigen::Vector4d(b * Eigen::Vector2d(3.0, -2.0)) == Eigen::Vector4d{0, 0, 3, -2});
  CHECK(b.row(0).isZero(0.0));
  CHECK(b.row(1).isZero(0.0));
}

TEST_CASE("h value of the first scenario-1 obstacle") {
  CHECK(h_value(h1, {17, 40}) == -64.0);
  CHECK(h_value(h1, {25, 40}) == 0.0);
  CHECK(h_value(h1, {5, 5}) == 1305.0);
}

TEST_CASE("h gradient analytic vs central differences") {
  CHECK(h_gradient(h1, {17, 40}) == Eigen::Vector2d{0, 0});
  CHECK(h_gradient(h1, {25, 40}) == Eigen::Vector2d{16, 0});

  constexpr double step = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    BarrierConstraint c;
    c.center = {-10.0 + 30.0 * rng::uniform(rng::combine(1, trial, 0)),
                -10.0 + 30.0 * rng::uniform(rng::combine(1, trial, 1))};
    c.radius = 0.5 + 8.0 * rng::uniform(rng::combine(1, trial, 2));
    const Eigen::Vector2d pos{-20.0 + 60.0 * rng::uniform(rng::combine(1, trial, 3)),
                              -20.0 + 60.0 * rng::uniform(rng::combine(1, trial, 4))};
    const Eigen::Vector2d analytic = h_gradient(c, pos);
    Eigen::Vector2d fd;
    for (int d = 0; d < 2; ++d) {
      Eigen::Vector2d up = pos, down = pos;
      up[d] += step;
      down[d] -= step;
      fd[d] = (h_value(c, up) - h_value(c, down)) / (2.0 * step);
    }
    CHECK((analytic - fd).norm() / std::max(1.0, analytic.norm()) < 1e-6);
  }
}

TEST_CASE("bas_init matches the hand-computed scenario value") {
  const BasSpec spec = BasSpec::make(0.5, {h1});
  Eigen::Vector4d x0{5, 5, 0, 0};
  const VectorXd z = bas_init(spec, x0);
  CHECK(z[0] == doctest::Approx(1.0 / 1305.0 - 1.0 / 1825.0).epsilon(1e-12));
  CHECK(z[0] == doctest::Approx(2.1834e-4).epsilon(1e-4));

  // a start with h(x0) = h(0) has zero initial barrier state
  const double r0 = std::sqrt(17.0 * 17.0 + 40.0 * 40.0);
  Eigen::Vector4d same_h{17.0 + r0, 40.0, 0, 0};
  CHECK(bas_init(spec, same_h)[0] == doctest::Approx(0.0).epsilon(1e-15));

  Eigen::Vector4d boundary{25, 40, 0, 0};
  CHECK_THROWS_AS(bas_init(spec, boundary), SafetyViolation);
  Eigen::Vector4d inside{17, 40, 0, 0};
  CHECK_THROWS_AS(bas_init(spec, inside), SafetyViolation);
}

TEST_CASE("bas drift vanishes on the manifold when grad(h).g = 0") {
  // passive agent, h(x) = |x|^2 - 2 so h = 2 at (2, 0) and xi = 1/h = 1/2
  const AgentModel still = make_single_integrator_model(2, 1.0);
  BarrierConstraint c{{0.0, 0.0}, std::sqrt(2.0), 1};
  const BasSpec spec = BasSpec::make(0.5, {c});
  CHECK(spec.beta0[0] == doctest::Approx(-0.5).epsilon(1e-15));
  Eigen::Vector2d x{2.0, 0.0};
  const double z_on_manifold = 0.5 - spec.beta0[0];
  CHECK(bas_drift(spec, 0, x, z_on_manifold, 0.0, still) == doctest::Approx(0.0).epsilon(1e-15));

  // xi = 0 kills both terms regardless of the state
  CHECK(bas_drift(spec, 0, x, -spec.beta0[0], 0.0, still) == 0.0);
}

TEST_CASE("bas drift for a moving uav near obstacle 1") {
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const BasSpec spec = BasSpec::make(0.5, {h1});
  Eigen::Vector4d x{5, 5, 1, 0};
  const double z = 1.0 / 1305.0 - spec.beta0[0];  // on-manifold
  const double drift = bas_drift(spec, 0, x, z, 0.0, uav);
  // gamma terms cancel on the manifold; -(1/1305)^2 * (grad . g) with grad.g = -24
  CHECK(drift == doctest::Approx(24.0 / (1305.0 * 1305.0)).epsilon(1e-9));
  CHECK(drift == doctest::Approx(1.409e-5).epsilon(1e-3));
}

TEST_CASE("bas control row") {
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const BasSpec spec = BasSpec::make(0.5, {h1});
  Eigen::Vector4d x{5, 5, 2, 0.3};
  CHECK(bas_control_row(spec, 0, x, 0.123, uav).isZero(0.0));
  CHECK(bas_control_row(spec, 0, x, -spec.beta0[0], uav).isZero(0.0));

  // single integrator: B = I on positions, grad = (16, 0), xi = 1/2
  const AgentModel si = make_single_integrator_model(2, 1.0);
  BarrierConstraint unit{{0.0, 0.0}, 1.0, 1};
  const BasSpec sspec = BasSpec::make(0.5, {unit});
  Eigen::Vector2d pos{8.0, 0.0};
  const double z = 0.5 - sspec.beta0[0];
  const Eigen::RowVectorXd row = bas_control_row(sspec, 0, pos, z, si);
  CHECK(row[0] == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(row[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("bas dynamics stay finite under the clamp") {
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const BasSpec spec = BasSpec::make(0.5, {h1});
  Eigen::Vector4d inside{17, 40, 3, 0.5};
  CHECK(std::isfinite(bas_drift(spec, 0, inside, 1e18, 0.0, uav)));
  CHECK(std::isfinite(bas_drift(spec, 0, inside, -1e18, 0.0, uav)));
  CHECK(bas_control_row(spec, 0, inside, 1e18, uav).allFinite());
}

TEST_CASE("assemble_augmented dimensions for the 3-uav subsystem") {
  const auto aug = three_uav_subsystem(3);
  CHECK(aug.total_dim() == 15);
  CHECK(aug.total_control_dim() == 6);
  CHECK(aug.bas_offset() == 4);
  CHECK(aug.member_offset(0) == 0);
  CHECK(aug.member_offset(1) == 7);
  CHECK(aug.member_offset(2) == 11);

  const auto single = factorize(AgentGraph::fully_connected(1), 4);
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const auto one = assemble_augmented(single[0], {uav}, BasSpec::make(0.5, {h1}));
  CHECK(one.total_dim() == 5);
  const MatrixXd b = one.control_matrix((VectorXd(5) << 5, 5, 1, 0, 1e-3).finished());
  CHECK(b.rows() == 5);
  CHECK(b.cols() == 2);
  CHECK(b.topRows(4) == MatrixXd(uav_control_matrix()));
}

TEST_CASE("heterogeneous members are rejected") {
  const auto subs = factorize(AgentGraph::fully_connected(2), 4);
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const AgentModel si = make_single_integrator_model(2, 1.0);
  CHECK_THROWS_AS(assemble_augmented(subs[0], {uav, si}, BasSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(assemble_augmented(subs[0], {uav}, BasSpec{}), std::invalid_argument);
}

TEST_CASE("zero-constraint augmentation is bitwise the plain joint stacking") {
  const auto aug = three_uav_subsystem(0);
  CHECK(aug.total_dim() == 12);
  for (int trial = 0; trial < 25; ++trial) {
    VectorXd y(12), u(6);
    for (int k = 0; k < 12; ++k) y[k] = -10.0 + 20.0 * rng::uniform(rng::combine(3, trial, k));
    for (int k = 0; k < 6; ++k) u[k] = -2.0 + 4.0 * rng::uniform(rng::combine(4, trial, k));

    VectorXd drift_aug(12);
    aug.drift(y, 0.7, drift_aug);
    VectorXd effect = VectorXd::Zero(12);
    aug.add_control_effect(y, u, effect);

    // direct stacking of the unaugmented joint dynamics
    for (int m = 0; m < 3; ++m) {
      const Eigen::Vector4d xm = y.segment<4>(4 * m);
      const Eigen::Vector4d gm = uav_drift(xm);
      CHECK(drift_aug.segment<4>(4 * m) == gm);
      const Eigen::Vector4d em = uav_control_matrix() * u.segment<2>(2 * m);
      CHECK(effect.segment<4>(4 * m) == em);
    }
  }
}

TEST_CASE("partition splits direct and non-direct rows structurally") {
  auto aug = three_uav_subsystem(3);
  const auto [direct, nondirect] = partition(aug, default_probe_states(aug));
  CHECK(direct == std::vector<int>{2, 3, 9, 10, 13, 14});
  CHECK(nondirect == std::vector<int>{0, 1, 4, 5, 6, 7, 8, 11, 12});
  aug.set_partition(direct, nondirect);
  CHECK(aug.constant_direct_control_matrix());

  // single integrator with a position constraint: the BaS row is actuated
  const auto single = factorize(AgentGraph::fully_connected(1), 2);
  const AgentModel si = make_single_integrator_model(2, 1.0);
  auto aug_si =
      assemble_augmented(single[0], {si}, BasSpec::make(0.5, {BarrierConstraint{{5, 5}, 1.0, 1}}));
  const auto [d2, n2] = partition(aug_si, default_probe_states(aug_si));
  CHECK(d2 == std::vector<int>{0, 1, 2});
  CHECK(n2.empty());
  aug_si.set_partition(d2, n2);
  CHECK_FALSE(aug_si.constant_direct_control_matrix());

  const auto plain = three_uav_subsystem(0);
  const auto [d3, n3] = partition(plain, default_probe_states(plain));
  CHECK(d3 == std::vector<int>{2, 3, 6, 7, 10, 11});

  CHECK_THROWS_AS(partition(aug, {}), std::invalid_argument);
}

TEST_CASE("deterministic integration keeps z on the barrier manifold") {
  // one uav circling at constant speed with a bounded steering input
  const AgentModel uav = make_uav_model({0.1, 0.05});
  const BasSpec spec = BasSpec::make(0.5, {h1});
  Eigen::Vector4d x{5, 5, 1, M_PI_2};
  VectorXd z = bas_init(spec, x);

  const double dt = 1e-4;
  double max_dev = 0.0;
  VectorXd g(4);
  MatrixXd b(4, 2);
  for (int k = 0; k < 50000; ++k) {  // 5 seconds
    const double t = k * dt;
    const Eigen::Vector2d u{0.1 * std::cos(0.4 * t), 0.08 * std::sin(0.3 * t)};
    uav.drift(x, t, g);
    uav.control_matrix(x, b);
    for (int j = 0; j < spec.count(); ++j) {
      const double gb = bas_drift(spec, j, x, z[j], t, uav);
      const Eigen::RowVectorXd bb = bas_control_row(spec, j, x, z[j], uav);
      z[j] += dt * (gb + bb.dot(u));
    }
    x += dt * (g + b * u);
    const double h = h_value(h1, x.head<2>());
    REQUIRE(h > 1.0);
    max_dev = std::max(max_dev, std::abs(z[0] - (1.0 / h - spec.beta0[0])));
  }
  CHECK(max_dev < 1e-6);

  // Lemma 1 direction used operationally: away from the boundary z stays small
  CHECK(std::abs(z[0]) <= 1.0 + std::abs(spec.beta0[0]) + 1e-6);
}
