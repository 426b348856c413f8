#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sepic/report.hpp"
#include "sepic/scenario.hpp"
#include "sepic/sim.hpp"
#include "sepic/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitControllerFailure = 3;
constexpr int kExitVerificationFailure = 4;

struct CommonOpts {
  std::string config;
  std::string output_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> samples;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* c = cmd->add_option("-c,--config", opts.config,
                            "scenario config file or bundled name (scenario1, scenario2)");
  if (needs_config) c->required();
  const char* env_dir = std::getenv("SEPIC_OUTPUT_DIR");
  opts.output_dir = env_dir ? env_dir : ".";
  cmd->add_option("-o,--output", opts.output_dir, "output directory");
  cmd->add_option("--set", opts.overrides, "config override key.path=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "override master_seed");
  cmd->add_option("--episodes", opts.episodes, "override n_episodes");
  cmd->add_option("--samples", opts.samples, "override sampler.n_samples");
  cmd->add_option("--threads", opts.threads, "worker threads for rollout sampling");
}

sepic::ScenarioConfig resolve_config(const CommonOpts& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("master_seed=" + std::to_string(*opts.seed));
  if (opts.episodes) overrides.push_back("n_episodes=" + std::to_string(*opts.episodes));
  if (opts.samples) overrides.push_back("sampler.n_samples=" + std::to_string(*opts.samples));
  if (opts.threads) overrides.push_back("threads=" + std::to_string(*opts.threads));
  return sepic::apply_overrides(sepic::config_text(opts.config), overrides, opts.config);
}

std::string join_path(const std::string& dir, const std::string& file) {
  if (dir.empty() || dir == ".") return file;
  return dir + "/" + file;
}

int controller_exit(const sepic::BatchReport& report) {
  for (const auto& m : report.episodes)
    if (m.controller_failures > 0) return kExitControllerFailure;
  return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
  const auto cfg = resolve_config(opts);
  const std::uint64_t seed = sepic::episode_seed(cfg.master_seed, 0);
  auto [log, metrics] = sepic::run_episode(cfg, seed);
  const std::string csv = join_path(opts.output_dir, cfg.name + "_episode0.csv");
  sepic::write_trajectory_csv(csv, cfg, log);
  std::cout << cfg.name << " [" << sepic::to_string(cfg.controller) << "] seed=" << seed << "\n"
            << sepic::format_metrics_line(metrics) << "\n"
            << "trajectory written to " << csv << "\n";
  return metrics.controller_failures > 0 ? kExitControllerFailure : kExitOk;
}

int cmd_batch(const CommonOpts& opts, bool write_trajectories) {
  const auto cfg = resolve_config(opts);
  sepic::EpisodeObserver observer;
  if (write_trajectories) {
    observer = [&](int e, const sepic::TrajectoryLog& log, const sepic::EpisodeMetrics&) {
      sepic::write_trajectory_csv(
          join_path(opts.output_dir, cfg.name + "_episode" + std::to_string(e) + ".csv"), cfg,
          log);
    };
  }
  const auto report = sepic::run_batch(cfg, observer);
  const std::string report_path = join_path(opts.output_dir, cfg.name + "_batch.json");
  sepic::write_batch_report(report_path, cfg, report);
  std::cout << cfg.name << " [" << sepic::to_string(cfg.controller) << "] " << cfg.n_episodes
            << " episodes\n";
  for (std::size_t e = 0; e < report.episodes.size(); ++e)
    std::cout << "  episode " << e << " (seed " << report.episode_seeds[e] << "): "
              << sepic::format_metrics_line(report.episodes[e]) << "\n";
  std::cout << "safe_rate=" << report.safe_rate << " mean_goal_error=" << report.mean_goal_error
            << " mean_pair_distance=" << report.mean_pair_distance << "\n"
            << "report written to " << report_path << "\n";
  return controller_exit(report);
}

int cmd_compare(const CommonOpts& opts, const std::string& controllers) {
  const auto base = resolve_config(opts);
  std::vector<sepic::ControllerKind> kinds;
  {
    std::string list = controllers;
    std::size_t begin = 0;
    while (begin <= list.size()) {
      const auto comma = list.find(',', begin);
      const std::string name =
          list.substr(begin, comma == std::string::npos ? comma : comma - begin);
      if (!name.empty()) {
        const auto k = sepic::controller_from_string(name);
        if (!k) throw sepic::ConfigError("unknown controller '" + name + "'");
        kinds.push_back(*k);
      }
      if (comma == std::string::npos) break;
      begin = comma + 1;
    }
  }
  std::vector<sepic::ComparisonEntry> entries;
  int exit_code = kExitOk;
  for (const auto kind : kinds) {
    sepic::ScenarioConfig cfg = base;
    cfg.controller = kind;
    std::cout << "running " << sepic::to_string(kind) << " (" << cfg.n_episodes << " episodes)"
              << std::endl;
    auto report = sepic::run_batch(cfg);
    exit_code = std::max(exit_code, controller_exit(report));
    entries.push_back({kind, std::move(report)});
  }
  const std::string report_path = join_path(opts.output_dir, base.name + "_compare.json");
  sepic::write_comparison_report(report_path, base, entries);
  std::cout << "\n" << sepic::format_comparison_table(entries) << "report written to "
            << report_path << "\n";
  return exit_code;
}

int cmd_verify(const CommonOpts& opts, const std::string& suite) {
  sepic::ScenarioConfig cfg;
  if (!opts.config.empty()) {
    cfg = resolve_config(opts);
  } else {
    cfg = sepic::load_config("scenario1");
  }
  const auto results = sepic::run_verification(suite, cfg);
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": measured " << r.measured
              << " vs required " << r.required << " (" << r.detail << ")\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitVerificationFailure;
}

int cmd_list() {
  for (const auto& name : sepic::bundled_scenarios()) {
    const auto cfg = sepic::load_config(name);
    std::cout << name << ": " << cfg.n_agents() << " agents, " << cfg.obstacles.size()
              << " obstacles, t_f=" << cfg.t_f << "s, dt=" << cfg.dt
              << "s, controller=" << sepic::to_string(cfg.controller) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safety-embedded path-integral control for networked multi-agent systems"};
  app.require_subcommand(1);

  CommonOpts run_opts, batch_opts, compare_opts, verify_opts;
  bool batch_trajectories = false;
  std::string compare_controllers = "bas-pic,penalty-pic,cbf-npo,cbf-po";
  std::string verify_suite = "all";

  auto* run = app.add_subcommand("run", "run a single episode and write its trajectory");
  add_common(run, run_opts);

  auto* batch = app.add_subcommand("batch", "run a batch of episodes");
  add_common(batch, batch_opts);
  batch->add_flag("--trajectories", batch_trajectories, "write per-episode trajectory files");

  auto* compare = app.add_subcommand("compare", "run several controllers under shared seeds");
  add_common(compare, compare_opts);
  compare->add_option("--controllers", compare_controllers, "comma-separated controller list");

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  add_common(verify, verify_opts, false);
  verify->add_option("--suite", verify_suite,
                     "manifold | gradients | pathvalue-oracle | lq-sanity | all");

  app.add_subcommand("list-scenarios", "list bundled scenario configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (batch->parsed()) return cmd_batch(batch_opts, batch_trajectories);
    if (compare->parsed()) return cmd_compare(compare_opts, compare_controllers);
    if (verify->parsed()) return cmd_verify(verify_opts, verify_suite);
    return cmd_list();
  } catch (const sepic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
