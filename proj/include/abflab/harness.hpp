#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "abflab/fields.hpp"

namespace abflab::harness {

enum class RunKind { pde_abf_metric, pde_abf_plain, pde_frozen, particles_metric, particles_plain, marginal_only, oracle_only };

std::string to_string(RunKind k);

struct ExperimentConfig {
  RunKind run_kind = RunKind::oracle_only;

  // model
  double c = 1.0;
  double a = 0.5;
  double k = 4.0;
  double beta = 1.0;
  bool torus = true;
  double x_lo = -1.0;
  double x_hi = 1.0;
  double alpha = 1.0;
  double y_half_width = 0.0;  // 0: 8 / sqrt(beta k)
  std::string xi = "x";       // x | parabolic (xi = x + xi_b y^2 mod 1)
  double xi_b = 0.05;

  // numerics
  std::size_t n_x = 128;
  std::size_t n_y = 128;
  std::size_t n_bins = 32;
  std::size_t n_particles = 100000;
  std::size_t n_z = 256;
  double dt = 0.0;  // 0: 0.9 of the admissible step (PDE kinds) or 1e-3 (particles)
  double t_end = 1.0;
  std::size_t output_stride = 100;
  std::size_t snapshot_stride = 0;
  double tau = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;

  // initial data
  std::string init = "uniform";  // particles: uniform | gibbs | equilibrium | point
  double init_x = 0.5;
  double init_y = 0.0;
  std::string pde_init = "product";  // product | equilibrium
  double init_amplitude = 0.5;
  double init_y_mean = 0.5;
  double init_y_sd = 0.35;
  double line_mean = 2.0;  // marginal_only on the line: Gaussian start
  double line_sd = 1.0;

  // options
  bool track_ito = false;
  std::size_t ito_stride = 1;
  bool interpolate_bias = false;
  bool cross_check_2d = false;
  double fit_t_lo = 0.0;
  double fit_t_hi = -1.0;  // < 0: t_end
};

/// Flat key=value text with `#` comments. Unknown or repeated keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Throws ConfigError on inconsistent settings (CFL is checked when the run is prepared).
void validate(const ExperimentConfig& cfg);
/// Every key with its resolved value, one per line.
std::string echo(const ExperimentConfig& cfg);

fields::ModelProblem build_model(const ExperimentConfig& cfg);

struct RunOptions {
  std::optional<std::string> out;
  bool overwrite = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

struct RunResult {
  int exit_code = 0;
  std::string out_dir;
  nlohmann::json summary;
};

/// Validates, prepares, creates the output directory and runs. Validation errors
/// throw before anything is written.
RunResult run(ExperimentConfig cfg, const RunOptions& options);

struct CompareReport {
  std::vector<std::string> problems;  // missing or corrupt inputs
  std::vector<std::string> rows;      // formatted table
  double max_abs_delta = 0.0;
  std::size_t bias_bins = 0;
  std::size_t bias_bins_within = 0;
  int exit_code = 0;
};

/// Per-metric deltas between two run directories' summary.json.
CompareReport compare_runs(const std::string& dir_a, const std::string& dir_b, std::optional<double> tolerance);

/// Fits every diagnostics column of a run directory and writes rates.gp there.
/// Returns the printed table.
std::vector<std::string> rates(const std::string& dir);

}  // namespace abflab::harness
