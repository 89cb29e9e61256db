#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "abflab/errors.hpp"
#include "abflab/harness.hpp"

namespace {

using abflab::harness::ExperimentConfig;
using abflab::harness::RunOptions;

struct RunFlags {
  std::string config;
  std::string out;
  bool overwrite = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  void attach(CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", config, "key=value experiment file");
    if (config_required) c->required();
    cmd->add_option("--out", out, "output directory (default: $ABFLAB_OUT or ./abflab_runs, timestamped)");
    cmd->add_flag("--overwrite", overwrite, "allow writing into a non-empty --out directory");
    cmd->add_option("--seed", seed, "RNG seed (overrides the config)");
    cmd->add_option("--threads", threads, "worker threads; results do not depend on it");
  }

  RunOptions options() const {
    RunOptions o;
    if (!out.empty()) o.out = out;
    o.overwrite = overwrite;
    o.seed = seed;
    o.threads = threads;
    return o;
  }
};

int execute(ExperimentConfig cfg, const RunOptions& options) {
  const auto r = abflab::harness::run(std::move(cfg), options);
  std::cout << r.out_dir << '\n';
  for (const auto& m : r.summary["monitors"]) {
    std::cout << (m["passed"].get<bool>() ? "ok   " : (m["fatal"].get<bool>() ? "FAIL " : "warn ")) << m["name"].get<std::string>();
    if (!m["passed"].get<bool>()) std::cout << ": " << m["detail"].get<std::string>();
    std::cout << '\n';
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABF free-energy toolkit: oracle, PDE and particle runs, diagnostics"};
  app.require_subcommand(1);

  RunFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "compute the free-energy profile only");
  oracle_flags.attach(oracle, false);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run the experiment described by --config");
  run_flags.attach(run, true);

  std::string dir_a, dir_b;
  std::optional<double> tol;
  auto* compare = app.add_subcommand("compare", "per-metric deltas between two run directories");
  compare->add_option("dir_a", dir_a)->required();
  compare->add_option("dir_b", dir_b)->required();
  compare->add_option("--tol", tol, "fail when any |delta| exceeds this");

  std::string rates_dir;
  auto* rates = app.add_subcommand("rates", "fit decay rates of diagnostics.csv and write rates.gp");
  rates->add_option("dir", rates_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*oracle) {
      ExperimentConfig cfg;
      if (!oracle_flags.config.empty()) cfg = abflab::harness::load_config(oracle_flags.config);
      cfg.run_kind = abflab::harness::RunKind::oracle_only;
      return execute(cfg, oracle_flags.options());
    }
    if (*run) return execute(abflab::harness::load_config(run_flags.config), run_flags.options());
    if (*compare) {
      const auto rep = abflab::harness::compare_runs(dir_a, dir_b, tol);
      for (const auto& p : rep.problems) std::cerr << p << '\n';
      for (const auto& row : rep.rows) std::cout << row << '\n';
      return rep.exit_code;
    }
    if (*rates) {
      for (const auto& line : abflab::harness::rates(rates_dir)) std::cout << line << '\n';
      return 0;
    }
  } catch (const abflab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
