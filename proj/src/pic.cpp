#include "sepic/pic.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "sepic/rng.hpp"

namespace sepic {
namespace {

struct DirectDiffusion {
  MatrixXd h;
  MatrixXd h_inv;  // from the Cholesky factorization
  double log_det = 0.0;
};

MatrixXd direct_rows(const MatrixXd& full, const std::vector<int>& direct) {
  MatrixXd out(direct.size(), full.cols());
  for (std::size_t r = 0; r < direct.size(); ++r) out.row(r) = full.row(direct[r]);
  return out;
}

DirectDiffusion make_diffusion(const AugmentedJointDynamics& aug, Eigen::Ref<const VectorXd> y) {
  if (aug.direct_indices().empty())
    throw DegenerateDiffusion("h_matrix: no directly actuated states");
  const MatrixXd bd = direct_rows(aug.control_matrix(y), aug.direct_indices());
  const VectorXd s2 = aug.joint_noise_scale().array().square();
  DirectDiffusion d;
  d.h = bd * s2.asDiagonal() * bd.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d.h, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 1e-12)
    throw DegenerateDiffusion("h_matrix: directly actuated diffusion is not positive definite");
  Eigen::LLT<MatrixXd> llt(d.h);
  d.h_inv = llt.solve(MatrixXd::Identity(d.h.rows(), d.h.cols()));
  d.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return d;
}

std::uint64_t rollout_key(const SamplerConfig& cfg) {
  return rng::derive(cfg.seed, rng::Domain::controller);
}

// Fill dw with sqrt(eps)-scaled standard normals for (sample, step).
void draw_noise(std::uint64_t key, int sample, int step, double sqrt_eps,
                Eigen::Ref<VectorXd> dw) {
  const int n = static_cast<int>(dw.size());
  for (int c = 0; c * 2 < n; ++c) {
    const auto [a, b] = rng::normal_pair(rng::combine(key, static_cast<std::uint64_t>(sample),
                                                      static_cast<std::uint64_t>(step),
                                                      static_cast<std::uint64_t>(c)));
    dw[2 * c] = a * sqrt_eps;
    if (2 * c + 1 < n) dw[2 * c + 1] = b * sqrt_eps;
  }
}

void check_partitioned(const AugmentedJointDynamics& aug) {
  if (!aug.has_partition())
    throw std::logic_error("pic: partition must be computed before sampling");
}

}  // namespace

PathSample rollout_uncontrolled(const AugmentedJointDynamics& aug, Eigen::Ref<const VectorXd> y0,
                                const SamplerConfig& cfg, int sample_index, double t0) {
  if (y0.size() != aug.total_dim())
    throw std::invalid_argument("rollout_uncontrolled: state dimension mismatch");
  const int k_steps = cfg.horizon_steps;
  const int nc = aug.total_control_dim();
  const double sqrt_eps = std::sqrt(cfg.eps);
  const std::uint64_t key = rollout_key(cfg);
  const VectorXd sigma = aug.joint_noise_scale();

  PathSample sample;
  sample.states.resize(aug.total_dim(), k_steps + 1);
  sample.states.col(0) = y0;
  VectorXd y = y0;
  VectorXd g(aug.total_dim());
  VectorXd next(aug.total_dim());
  VectorXd dw(nc);
  for (int k = 0; k < k_steps; ++k) {
    aug.drift(y, t0 + k * cfg.eps, g);
    next = y + cfg.eps * g;
    draw_noise(key, sample_index, k, sqrt_eps, dw);
    dw.array() *= sigma.array();
    aug.add_control_effect(y, dw, next);
    y = next;
    sample.states.col(k + 1) = y;
    if (!y.allFinite()) {
      sample.rejected = true;
      for (int r = k + 2; r <= k_steps; ++r) sample.states.col(r) = y;
      break;
    }
  }
  return sample;
}

MatrixXd h_matrix(const AugmentedJointDynamics& aug, Eigen::Ref<const VectorXd> y) {
  check_partitioned(aug);
  return make_diffusion(aug, y).h;
}

double path_value(const AugmentedJointDynamics& aug, const SubsystemCost& cost,
                  const PathSample& sample, const SamplerConfig& cfg, double lambda, double t0) {
  check_partitioned(aug);
  const int k_steps = cfg.horizon_steps;
  if (sample.states.cols() != k_steps + 1)
    throw std::invalid_argument("path_value: sample must hold K+1 states");
  const auto& direct = aug.direct_indices();
  const int nd = static_cast<int>(direct.size());
  const bool const_h = aug.constant_direct_control_matrix();

  DirectDiffusion diff;
  if (const_h) diff = make_diffusion(aug, sample.states.col(0));

  double q_sum = 0.0;
  double log_det_sum = 0.0;
  double quad_sum = 0.0;
  VectorXd g(aug.total_dim());
  VectorXd alpha(nd), tmp(nd);
  for (int k = 0; k < k_steps; ++k) {
    const auto yk = sample.states.col(k);
    q_sum += cost.running(yk);
    if (!const_h) diff = make_diffusion(aug, yk);
    log_det_sum += diff.log_det;
    aug.drift(yk, t0 + k * cfg.eps, g);
    for (int r = 0; r < nd; ++r)
      alpha[r] = (sample.states(direct[r], k + 1) - sample.states(direct[r], k)) / cfg.eps -
                 g[direct[r]];
    tmp.noalias() = diff.h_inv * alpha;
    quad_sum += alpha.dot(tmp);
  }
  const double phi = cost.terminal(sample.states.col(k_steps));
  return phi / lambda + (cfg.eps / lambda) * q_sum + 0.5 * log_det_sum +
         (cfg.eps / (2.0 * lambda)) * quad_sum;
}

VectorXd initial_control_variable(const AugmentedJointDynamics& aug, const SubsystemCost& cost,
                                  const PathSample& sample, const SamplerConfig& cfg,
                                  double lambda, double t0) {
  check_partitioned(aug);
  if (cfg.horizon_steps < 1)
    throw std::invalid_argument("initial_control_variable: needs at least one step");
  const auto& direct = aug.direct_indices();
  const int nd = static_cast<int>(direct.size());
  const DirectDiffusion diff = make_diffusion(aug, sample.states.col(0));
  VectorXd g(aug.total_dim());
  aug.drift(sample.states.col(0), t0, g);
  VectorXd alpha(nd);
  for (int r = 0; r < nd; ++r)
    alpha[r] =
        (sample.states(direct[r], 1) - sample.states(direct[r], 0)) / cfg.eps - g[direct[r]];
  const VectorXd grad = cost.gradient_direct(sample.states.col(0), direct);
  return -(cfg.eps / lambda) * grad + diff.h_inv * alpha;
}

VectorXd softmax_weights(const VectorXd& path_values) {
  const double low = path_values.minCoeff();
  VectorXd w = (-(path_values.array() - low)).exp();
  return w / w.sum();
}

double effective_sample_size(Eigen::Ref<const VectorXd> weights) {
  return 1.0 / weights.array().square().sum();
}

std::optional<ControlEstimate> estimate_control(const AugmentedJointDynamics& aug,
                                                const SubsystemCost& cost,
                                                const ControlWeights& weights,
                                                Eigen::Ref<const VectorXd> y0,
                                                const SamplerConfig& cfg, double t0) {
  check_partitioned(aug);
  if (y0.size() != aug.total_dim())
    throw std::invalid_argument("estimate_control: state dimension mismatch");
  if (!y0.allFinite()) throw std::invalid_argument("estimate_control: query state must be finite");

  const int n = cfg.n_samples;
  const int k_steps = cfg.horizon_steps;
  const auto& direct = aug.direct_indices();
  const int nd = static_cast<int>(direct.size());
  const int nc = aug.total_control_dim();
  const double lambda = weights.lambda;
  const double sqrt_eps = std::sqrt(cfg.eps);
  const std::uint64_t key = rollout_key(cfg);
  const VectorXd sigma = aug.joint_noise_scale();
  const bool const_h = aug.constant_direct_control_matrix();

  // the whole batch shares the query-state gradient term of u-tilde
  const VectorXd grad0 = cost.gradient_direct(y0, direct);
  DirectDiffusion shared_diff;
  if (const_h) shared_diff = make_diffusion(aug, y0);

  std::vector<double> values(n, 0.0);
  std::vector<char> rejected(n, 0);
  MatrixXd utilde(nd, n);

  DirectDiffusion diff_y0;
  if (!const_h) diff_y0 = make_diffusion(aug, y0);
  const DirectDiffusion& first_step_diff = const_h ? shared_diff : diff_y0;

  auto worker = [&](int begin, int end) {
    VectorXd y(aug.total_dim()), g(aug.total_dim()), next(aug.total_dim());
    VectorXd dw(nc), alpha(nd), tmp(nd);
    DirectDiffusion local_diff;
    for (int m = begin; m < end; ++m) {
      y = y0;
      double q_sum = 0.0, log_det_sum = 0.0, quad_sum = 0.0;
      bool bad = false;
      for (int k = 0; k < k_steps; ++k) {
        q_sum += cost.running(y);
        const DirectDiffusion& diff = const_h ? shared_diff : (local_diff = make_diffusion(aug, y));
        log_det_sum += diff.log_det;
        aug.drift(y, t0 + k * cfg.eps, g);
        next = y + cfg.eps * g;
        draw_noise(key, m, k, sqrt_eps, dw);
        dw.array() *= sigma.array();
        aug.add_control_effect(y, dw, next);
        for (int r = 0; r < nd; ++r)
          alpha[r] = (next[direct[r]] - y[direct[r]]) / cfg.eps - g[direct[r]];
        tmp.noalias() = diff.h_inv * alpha;
        quad_sum += alpha.dot(tmp);
        if (k == 0) {
          utilde.col(m) = -(cfg.eps / lambda) * grad0;
          utilde.col(m).noalias() += first_step_diff.h_inv * alpha;
        }
        y = next;
        if (!y.allFinite()) {
          bad = true;
          break;
        }
      }
      if (!bad) {
        const double phi = cost.terminal(y);
        values[m] = phi / lambda + (cfg.eps / lambda) * q_sum + 0.5 * log_det_sum +
                    (cfg.eps / (2.0 * lambda)) * quad_sum;
        if (!std::isfinite(values[m])) bad = true;
      }
      rejected[m] = bad ? 1 : 0;
    }
  };

  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    const int chunk = (n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(n, begin + chunk);
      pool.emplace_back([&, t, begin, end] {
        try {
          worker(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<int> accepted;
  accepted.reserve(n);
  for (int m = 0; m < n; ++m)
    if (!rejected[m]) accepted.push_back(m);
  if (accepted.empty()) return std::nullopt;

  double low = values[accepted[0]];
  for (int m : accepted) low = std::min(low, values[m]);
  double w_sum = 0.0, w2_sum = 0.0, value_sum = 0.0;
  VectorXd avg = VectorXd::Zero(nd);
  for (int m : accepted) {
    const double w = std::exp(-(values[m] - low));
    w_sum += w;
    avg += w * utilde.col(m);
    value_sum += values[m];
  }
  avg /= w_sum;
  for (int m : accepted) {
    const double w = std::exp(-(values[m] - low)) / w_sum;
    w2_sum += w * w;
  }

  const MatrixXd bd0 = direct_rows(aug.control_matrix(y0), direct);
  ControlEstimate est;
  est.joint_control = lambda * weights.r_inv_diag().asDiagonal() * (bd0.transpose() * avg);
  est.local_control = est.joint_control.head(aug.control_dim());
  est.effective_samples = 1.0 / w2_sum;
  est.min_path_value = low;
  est.mean_path_value = value_sum / static_cast<double>(accepted.size());
  est.rejected_samples = n - static_cast<int>(accepted.size());
  est.degenerate_warning = est.rejected_samples * 2 > n;
  return est;
}

}  // namespace sepic
