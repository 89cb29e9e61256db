#include "abflab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "abflab/csv.hpp"
#include "abflab/diagnostics.hpp"
#include "abflab/errors.hpp"
#include "abflab/oracle.hpp"
#include "abflab/parallel.hpp"
#include "abflab/particles.hpp"
#include "abflab/pde.hpp"

namespace abflab::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::pde_abf_metric: return "pde_abf_metric";
    case RunKind::pde_abf_plain: return "pde_abf_plain";
    case RunKind::pde_frozen: return "pde_frozen";
    case RunKind::particles_metric: return "particles_metric";
    case RunKind::particles_plain: return "particles_plain";
    case RunKind::marginal_only: return "marginal_only";
    case RunKind::oracle_only: return "oracle_only";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------- config

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  return d;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

// Shortest of %.15g / %.17g that reads back exactly.
std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunKind parse_kind(const std::string& v) {
  for (auto k : {RunKind::pde_abf_metric, RunKind::pde_abf_plain, RunKind::pde_frozen, RunKind::particles_metric,
                 RunKind::particles_plain, RunKind::marginal_only, RunKind::oracle_only})
    if (to_string(k) == v) return k;
  throw ConfigError("run_kind: unknown value '" + v + "'");
}

struct Key {
  std::string name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Key> keys(ExperimentConfig& c) {
  auto real = [](const char* n, double& f) {
    return Key{n, [n, &f](const std::string& v) { f = parse_real(n, v); }, [&f] { return fmt_real(f); }};
  };
  auto size = [](const char* n, std::size_t& f) {
    return Key{n, [n, &f](const std::string& v) { f = static_cast<std::size_t>(parse_uint(n, v)); },
               [&f] { return std::to_string(f); }};
  };
  auto flag = [](const char* n, bool& f) {
    return Key{n, [n, &f](const std::string& v) { f = parse_bool(n, v); }, [&f] { return std::string(f ? "true" : "false"); }};
  };
  auto text = [](const char* n, std::string& f) {
    return Key{n, [&f](const std::string& v) { f = v; }, [&f] { return f; }};
  };
  return {
      Key{"run_kind", [&c](const std::string& v) { c.run_kind = parse_kind(v); }, [&c] { return to_string(c.run_kind); }},
      real("c", c.c),
      real("a", c.a),
      real("k", c.k),
      real("beta", c.beta),
      Key{"x_domain",
          [&c](const std::string& v) {
            if (v != "torus" && v != "interval") throw ConfigError("x_domain: expected torus or interval");
            c.torus = v == "torus";
          },
          [&c] { return std::string(c.torus ? "torus" : "interval"); }},
      real("x_lo", c.x_lo),
      real("x_hi", c.x_hi),
      real("alpha", c.alpha),
      real("y_half_width", c.y_half_width),
      text("xi", c.xi),
      real("xi_b", c.xi_b),
      size("n_x", c.n_x),
      size("n_y", c.n_y),
      size("n_bins", c.n_bins),
      size("n_particles", c.n_particles),
      size("n_z", c.n_z),
      real("dt", c.dt),
      real("t_end", c.t_end),
      size("output_stride", c.output_stride),
      size("snapshot_stride", c.snapshot_stride),
      real("tau", c.tau),
      Key{"seed",
          [&c](const std::string& v) {
            if (v == "none") c.seed.reset();
            else c.seed = parse_uint("seed", v);
          },
          [&c] { return c.seed ? std::to_string(*c.seed) : std::string("none"); }},
      size("threads", c.threads),
      text("init", c.init),
      real("init_x", c.init_x),
      real("init_y", c.init_y),
      text("pde_init", c.pde_init),
      real("init_amplitude", c.init_amplitude),
      real("init_y_mean", c.init_y_mean),
      real("init_y_sd", c.init_y_sd),
      real("line_mean", c.line_mean),
      real("line_sd", c.line_sd),
      flag("track_ito", c.track_ito),
      size("ito_stride", c.ito_stride),
      flag("interpolate_bias", c.interpolate_bias),
      flag("cross_check_2d", c.cross_check_2d),
      real("fit_t_lo", c.fit_t_lo),
      real("fit_t_hi", c.fit_t_hi),
  };
}

bool is_pde(RunKind k) {
  return k == RunKind::pde_abf_metric || k == RunKind::pde_abf_plain || k == RunKind::pde_frozen;
}
bool is_particles(RunKind k) { return k == RunKind::particles_metric || k == RunKind::particles_plain; }

// ---------------------------------------------------------------- output

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

std::string prepare_out_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  fs::path dir;
  if (options.out) {
    dir = *options.out;
    if (fs::exists(dir)) {
      if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
      if (!fs::is_empty(dir) && !options.overwrite)
        throw ConfigError(dir.string() + " is not empty; pass --overwrite to reuse it");
    }
  } else {
    const char* env = std::getenv("ABFLAB_OUT");
    const fs::path root = env && *env ? fs::path(env) : fs::path("abflab_runs");
    const std::string base = to_string(cfg.run_kind) + "_" + timestamp();
    dir = root / base;
    for (int n = 1; fs::exists(dir); ++n) dir = root / (base + "-" + std::to_string(n));
  }
  fs::create_directories(dir);
  if (cfg.snapshot_stride > 0) fs::create_directories(dir / "snapshots");
  return dir.string();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Monitor {
  Monitor(std::string n, bool f) : name(std::move(n)), fatal(f) {}

  std::string name;
  bool fatal = false;
  bool passed = true;
  std::size_t checks = 0;
  std::string detail;

  void check(bool ok, const std::string& why) {
    ++checks;
    if (!ok && passed) {
      passed = false;
      detail = why;
    }
  }
  json to_json() const { return {{"name", name}, {"fatal", fatal}, {"passed", passed}, {"checks", checks}, {"detail", detail}}; }
};

std::string at_time(const char* what, double t, double lhs, double rhs) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s at t = %.6g: %.6e > %.6e", what, t, lhs, rhs);
  return buf;
}

void write_diagnostics(const fs::path& p, const std::vector<diagnostics::Record>& recs) {
  csv::Writer w(p.string(), diagnostics::record_header());
  for (const auto& r : recs) {
    w.cell(r.t).cell(r.E_total).cell(r.E_macro).cell(r.E_micro).cell(r.fisher_macro).cell(r.tv_macro);
    w.cell(r.force_error_sq).cell(static_cast<std::uint64_t>(r.empty_bins));
    w.end_row();
  }
}

json fit_json(const std::vector<double>& t, const std::vector<double>& v, double lo, double hi) {
  try {
    const auto f = diagnostics::fit_decay_rate(t, v, lo, hi);
    return {{"rate", f.rate}, {"r_squared", f.r_squared}, {"points", f.points}, {"truncated", f.truncated},
            {"t_lo", lo}, {"t_hi", hi}};
  } catch (const Error& e) {
    return {{"error", e.what()}, {"t_lo", lo}, {"t_hi", hi}};
  }
}

json fits_for(const std::vector<diagnostics::Record>& recs, double lo, double hi) {
  std::vector<double> t, et, em, ei, fi, fe;
  for (const auto& r : recs) {
    t.push_back(r.t);
    et.push_back(r.E_total);
    em.push_back(r.E_macro);
    ei.push_back(r.E_micro);
    fi.push_back(r.fisher_macro);
    fe.push_back(r.force_error_sq);
  }
  json j;
  auto add = [&](const char* name, const std::vector<double>& v) {
    if (std::any_of(v.begin(), v.end(), [](double x) { return std::isnan(x); })) return;
    j[name] = fit_json(t, v, lo, hi);
  };
  add("E_total", et);
  add("E_macro", em);
  add("E_micro", ei);
  add("fisher_macro", fi);
  add("force_error_sq", fe);
  return j;
}

json constants_json(const fields::ConvergenceConstants& k) {
  return {{"m", k.m}, {"M", k.M_const}, {"rho", k.rho}, {"r", k.r}, {"lambda", k.lambda}};
}

/// Oracle bin average (A(hi) - A(lo)) / w of A' over each bin.
std::vector<double> oracle_bin_average(const fields::ModelProblem& model, const Axis& bins) {
  std::vector<double> la(bins.n + 1);
  for (std::size_t b = 0; b <= bins.n; ++b) la[b] = oracle::log_partition(model, bins.edge(b));
  std::vector<double> out(bins.n);
  for (std::size_t b = 0; b < bins.n; ++b) out[b] = -(la[b + 1] - la[b]) / (model.beta * bins.width());
  return out;
}

/// e^{-beta W} averaged per bin, normalized to unit discrete mass.
std::vector<double> equilibrium_marginal_bins(const fields::ModelProblem& model, const Axis& bins) {
  std::vector<double> q(bins.n);
  const int sub = 16;
  double s = 0.0;
  for (std::size_t b = 0; b < bins.n; ++b) {
    double acc = 0.0;
    for (int k = 0; k < sub; ++k) acc += std::exp(-model.beta * model.W(bins.edge(b) + (k + 0.5) * bins.width() / sub));
    q[b] = acc / sub;
    s += q[b];
  }
  for (auto& v : q) v /= s * bins.width();
  return q;
}

std::size_t steps_for(double t_end, double dt) {
  const double n = std::ceil(t_end / dt - 1e-9);
  return static_cast<std::size_t>(std::max(1.0, n));
}

bool record_due(std::size_t step, std::size_t n_steps, std::size_t stride) {
  return step == 0 || step == n_steps || (stride > 0 && step % stride == 0);
}

// ---------------------------------------------------------------- oracle

json run_oracle(const ExperimentConfig& cfg, const fields::ModelProblem& model, const fs::path& dir, WorkerPool* pool,
                std::vector<Monitor>& monitors) {
  json s;
  const auto z = oracle::profile_grid(model, cfg.n_z + 1);
  const auto prof = oracle::compute_free_energy(model, z, {}, pool);
  {
    csv::Writer w((dir / "profile.csv").string(), {"z", "A", "Aprime", "Z_sigma"});
    for (std::size_t i = 0; i < z.size(); ++i) {
      w.cell(prof.z[i]).cell(prof.A[i]).cell(prof.Aprime[i]).cell(prof.Z_sigma[i]);
      w.end_row();
    }
  }
  Monitor m{"mean_force_consistency", true};
  const double err = oracle::mean_force_consistency(model, prof);
  m.check(err <= 1e-6, "max |dA/dz - A'| = " + fmt_real(err));
  monitors.push_back(m);
  s["oracle"] = {{"n_z", cfg.n_z}, {"consistency_max_abs", err}};
  if (model.x_domain.lo <= 0.25 && 0.25 <= model.x_domain.hi) s["oracle"]["Aprime_quarter"] = oracle::mean_force(model, 0.25);
  return s;
}

// ---------------------------------------------------------------- PDE

struct PdePlan {
  fields::ModelProblem unit;
  Grid2D grid;
  pde::Variant variant;
  double dt_unit = 0.0;
  std::size_t n_steps = 0;
};

pde::Variant variant_for(RunKind k) {
  if (k == RunKind::pde_abf_metric) return pde::Variant::abf_metric;
  if (k == RunKind::pde_abf_plain) return pde::Variant::abf_plain;
  return pde::Variant::frozen_bias;
}

PdePlan plan_pde(const ExperimentConfig& cfg, const fields::ModelProblem& model, WorkerPool* pool) {
  PdePlan p{fields::to_unit_temperature(model), model.grid(cfg.n_x, cfg.n_y), variant_for(cfg.run_kind)};
  pde::FokkerPlanck2D probe(p.unit, p.grid, p.variant, pool);
  if (p.variant == pde::Variant::frozen_bias) {
    std::vector<double> a(cfg.n_x);
    for (std::size_t i = 0; i < cfg.n_x; ++i) a[i] = oracle::mean_force(p.unit, p.grid.x.center(i));
    probe.set_bias(a);
  }
  const double adm = probe.worst_case_dt();
  const double t_end_unit = cfg.t_end / cfg.beta;
  double dt = cfg.dt > 0.0 ? cfg.dt / cfg.beta : 0.9 * adm;
  if (dt > adm) throw ConfigError("dt = " + fmt_real(cfg.dt) + " exceeds the CFL bound; admissible dt = " + fmt_real(adm * cfg.beta));
  p.n_steps = steps_for(t_end_unit, dt);
  p.dt_unit = t_end_unit / static_cast<double>(p.n_steps);
  return p;
}

json run_pde(const ExperimentConfig& cfg, const fields::ModelProblem& model, const PdePlan& plan, const fs::path& dir,
             WorkerPool* pool, std::vector<Monitor>& monitors) {
  const double beta = cfg.beta;
  const auto& unit = plan.unit;
  const auto& grid = plan.grid;
  const std::size_t nx = grid.x.n;

  const auto eq = oracle::compute_equilibrium(unit, grid, {}, pool);
  const auto q_marg = pde::extract_marginal(eq.psi_inf);
  std::vector<double> a_oracle(nx);
  parallel_for(pool, nx, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) a_oracle[i] = oracle::mean_force(unit, grid.x.center(i));
  });

  DensityField field = cfg.pde_init == "equilibrium"
                           ? eq.psi_inf
                           : pde::product_initial(grid, cfg.init_amplitude, cfg.init_y_mean, cfg.init_y_sd);
  field.time = 0.0;

  pde::FokkerPlanck2D solver(unit, grid, plan.variant, pool);
  if (plan.variant == pde::Variant::frozen_bias) {
    // Exact A differences between centres make the discrete equilibrium stationary.
    std::vector<double> log_z(nx);
    for (std::size_t i = 0; i < nx; ++i) log_z[i] = oracle::log_partition(unit, grid.x.center(i));
    std::vector<double> jumps(grid.x.periodic ? nx : nx - 1);
    for (std::size_t i = 0; i < jumps.size(); ++i) jumps[i] = log_z[i] - log_z[(i + 1) % nx];
    solver.set_bias_jumps(a_oracle, jumps);
  }
  pde::FokkerPlanck2D column_means(unit, grid, pde::Variant::abf_metric, pool);

  const auto consts = fields::convergence_constants(model);
  Monitor extensivity{"entropy_extensivity", true};
  Monitor ck{"csiszar_kullback", true};
  Monitor mass{"mass_conservation", true};
  Monitor valid{"slice_exclusions_below_1pct", true};
  Monitor em_bound{"micro_entropy_bound", true};
  Monitor fe_bound{"force_error_bound", true};
  Monitor mono{"entropy_nonincreasing", true};

  std::vector<diagnostics::Record> recs;
  double E_m0 = 0.0;
  double I0 = 0.0;
  double prev_E = std::numeric_limits<double>::infinity();

  auto record = [&](std::size_t step) {
    const double t = field.time * beta;
    const auto parts = diagnostics::entropy_decomposition(field, eq.psi_inf);
    const auto pm = pde::extract_marginal(field);
    column_means.estimate_bias(field);
    diagnostics::Record r;
    r.t = t;
    r.E_total = parts.E_total;
    r.E_macro = parts.E_macro;
    r.E_micro = parts.E_micro;
    r.fisher_macro = diagnostics::fisher_information(pm.values, q_marg.values, grid.x);
    r.tv_macro = diagnostics::total_variation(pm.values, q_marg.values, grid.x.width());
    r.force_error_sq = diagnostics::force_error(column_means.bias(), a_oracle, pm.values, grid.x) / (beta * beta);
    recs.push_back(r);

    extensivity.check(std::abs(r.E_total - r.E_macro - r.E_micro) <= 1e-10,
                 at_time("|E - E_M - E_m|", t, std::abs(r.E_total - r.E_macro - r.E_micro), 1e-10));
    ck.check(r.tv_macro <= std::sqrt(2.0 * r.E_macro) + 1e-8, at_time("TV", t, r.tv_macro, std::sqrt(2.0 * r.E_macro) + 1e-8));
    mass.check(std::abs(field.mass() - 1.0) <= 1e-12, at_time("|mass - 1|", t, std::abs(field.mass() - 1.0), 1e-12));
    valid.check(parts.valid, at_time("excluded slice mass", t, parts.excluded_mass, 0.01));
    if (step == 0) {
      E_m0 = r.E_micro;
      I0 = r.fisher_macro;
    }
    if (plan.variant == pde::Variant::abf_metric) {
      const double bound =
          1.1 * diagnostics::micro_entropy_bound(t, E_m0, I0, consts.M_const, consts.rho, consts.m, consts.r, beta);
      em_bound.check(std::sqrt(r.E_micro) <= bound, at_time("sqrt(E_m)", t, std::sqrt(r.E_micro), bound));
      // absolute slack covers rounding once both sides reach the discretization floor
      const double rhs = 2.0 * consts.M_const * consts.M_const / consts.rho * r.E_micro + 1e-14;
      fe_bound.check(r.force_error_sq <= rhs, at_time("force_error_sq", t, r.force_error_sq, rhs));
    }
    if (plan.variant == pde::Variant::frozen_bias) {
      mono.check(r.E_total <= prev_E + 1e-14, at_time("E_total increased", t, r.E_total, prev_E));
      prev_E = r.E_total;
    }
  };

  const std::string vname = pde::to_string(plan.variant);
  auto snapshot = [&](std::size_t step) {
    char name[64];
    std::snprintf(name, sizeof name, "field_%08zu.csv", step);
    pde::write_field_csv((dir / "snapshots" / name).string(), field, vname);
  };

  for (std::size_t s = 0; s <= plan.n_steps; ++s) {
    if (record_due(s, plan.n_steps, cfg.output_stride)) record(s);
    if (cfg.snapshot_stride > 0 && (s % cfg.snapshot_stride == 0 || s == plan.n_steps)) snapshot(s);
    if (s == plan.n_steps) break;
    solver.step(field, plan.dt_unit);
  }

  write_diagnostics(dir / "diagnostics.csv", recs);

  // Final bias in physical units on the x cells.
  particles::BiasProfile final_bias = particles::make_bias_profile(model, nx);
  column_means.estimate_bias(field);
  for (std::size_t i = 0; i < nx; ++i) final_bias.force[i] = column_means.bias()[i] / beta;
  particles::write_bias_csv((dir / "bias_final.csv").string(), final_bias);

  monitors.push_back(extensivity);
  monitors.push_back(ck);
  monitors.push_back(mass);
  monitors.push_back(valid);
  if (plan.variant == pde::Variant::abf_metric) {
    monitors.push_back(em_bound);
    monitors.push_back(fe_bound);
  }
  if (plan.variant == pde::Variant::frozen_bias) monitors.push_back(mono);

  json s;
  s["constants"] = constants_json(consts);
  s["lambda"] = consts.lambda;
  s["grid"] = {{"n_x", cfg.n_x}, {"n_y", cfg.n_y}, {"dt", plan.dt_unit * beta}, {"steps", plan.n_steps}};
  s["initial"] = {{"E_micro", E_m0}, {"fisher_macro", I0}};
  const double hi = cfg.fit_t_hi < 0 ? cfg.t_end : cfg.fit_t_hi;
  s["fits"] = fits_for(recs, cfg.fit_t_lo, hi);
  s["fits_second_half"] = fits_for(recs, 0.5 * cfg.t_end, cfg.t_end);
  if (plan.variant == pde::Variant::abf_plain) {
    Monitor plain_decay{"qualitative_exponential_decay", false};
    const auto& f = s["fits_second_half"]["E_total"];
    const bool ok = f.contains("rate") && f["rate"].get<double>() > 0.0 && f["r_squared"].get<double>() >= 0.95;
    plain_decay.check(ok, "E_total fit over the second half: " + f.dump());
    monitors.push_back(plain_decay);
  }

  // Bias reduced to n_bins bins by marginal-weighted averaging of the columns.
  const auto pm = pde::extract_marginal(field);
  const Axis bins = model.z_axis(cfg.n_bins);
  std::vector<double> num(cfg.n_bins, 0.0), den(cfg.n_bins, 0.0), res(cfg.n_bins, 0.0);
  const auto& a = column_means.bias();
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t b = bins.locate(grid.x.center(i));
    num[b] += a[i] * pm.values[i];
    den[b] += pm.values[i];
    const std::size_t im = grid.x.periodic ? (i + nx - 1) % nx : (i == 0 ? 0 : i - 1);
    const std::size_t ip = grid.x.periodic ? (i + 1) % nx : std::min(i + 1, nx - 1);
    // second difference ~ h^2 A''' : the grid-refinement residual scale
    res[b] = std::max(res[b], std::abs(a[ip] - 2.0 * a[i] + a[im]) / beta);
  }
  json bias;
  for (std::size_t b = 0; b < cfg.n_bins; ++b) {
    bias["bin_lo"].push_back(bins.edge(b));
    bias["bin_hi"].push_back(bins.edge(b + 1));
    bias["force"].push_back(den[b] > 0 ? num[b] / den[b] / beta : 0.0);
    bias["stderr"].push_back(0.0);
    bias["residual"].push_back(res[b]);
  }
  bias["oracle"] = oracle_bin_average(model, bins);
  s["bias"] = bias;
  s["final"] = {{"t", recs.back().t},           {"E_total", recs.back().E_total},
                {"E_macro", recs.back().E_macro}, {"E_micro", recs.back().E_micro},
                {"fisher_macro", recs.back().fisher_macro}, {"force_error_sq", recs.back().force_error_sq}};
  return s;
}

// ---------------------------------------------------------------- marginal

json run_marginal(const ExperimentConfig& cfg, const fields::ModelProblem& model, const fs::path& dir,
                  WorkerPool* pool, std::vector<Monitor>& monitors) {
  const double beta = cfg.beta;
  const auto unit = fields::to_unit_temperature(model);
  const Axis ax = unit.z_axis(cfg.n_x);
  const auto kind = ax.periodic ? pde::MarginalKind::heat_torus : pde::MarginalKind::drift_line;
  pde::FokkerPlanck1D solver(unit, ax, kind);

  std::optional<pde::FokkerPlanck2D> solver2;
  std::optional<DensityField> field2;
  Density1D p;
  p.axis = ax;
  p.values.resize(ax.n);
  if (cfg.cross_check_2d) {
    field2 = pde::product_initial(unit.grid(cfg.n_x, cfg.n_y), cfg.init_amplitude, cfg.init_y_mean, cfg.init_y_sd);
    solver2.emplace(unit, field2->grid, pde::Variant::abf_metric, pool);
    p = pde::extract_marginal(*field2);
  } else if (ax.periodic) {
    for (std::size_t i = 0; i < ax.n; ++i)
      p.values[i] = 1.0 + cfg.init_amplitude * std::cos(2.0 * std::numbers::pi * ax.center(i));
  } else {
    for (std::size_t i = 0; i < ax.n; ++i) {
      const double u = (ax.center(i) - cfg.line_mean) / cfg.line_sd;
      p.values[i] = std::exp(-0.5 * u * u);
    }
  }
  {
    const double m = p.mass();
    for (auto& v : p.values) v /= m;
  }

  // Discrete stationary state of the scheme: e^{-W} at centres.
  std::vector<double> q(ax.n);
  for (std::size_t i = 0; i < ax.n; ++i) q[i] = std::exp(-unit.W(ax.center(i)));
  {
    double s = 0.0;
    for (double v : q) s += v;
    for (auto& v : q) v /= s * ax.width();
  }

  double adm = solver.admissible_dt();
  if (solver2) adm = std::min(adm, solver2->worst_case_dt());
  const double t_end_unit = cfg.t_end / beta;
  const double dt0 = cfg.dt > 0.0 ? cfg.dt / beta : 0.9 * adm;
  if (dt0 > adm) throw ConfigError("dt exceeds the CFL bound; admissible dt = " + fmt_real(adm * beta));
  const std::size_t n = steps_for(t_end_unit, dt0);
  const double dt = t_end_unit / static_cast<double>(n);
  const double r = ax.periodic ? 4.0 * std::numbers::pi * std::numbers::pi : unit.confinement->alpha;

  std::vector<diagnostics::Record> recs;
  std::vector<std::pair<double, double>> closure;
  Monitor fisher{"fisher_decay_bound", true};
  Monitor mass{"mass_conservation", true};
  double I0 = 0.0;
  for (std::size_t s = 0; s <= n; ++s) {
    if (record_due(s, n, cfg.output_stride)) {
      diagnostics::Record rec;
      rec.t = p.time * beta;
      rec.E_macro = diagnostics::relative_entropy(p.values, q, ax.width());
      rec.fisher_macro = diagnostics::fisher_information(p.values, q, ax);
      rec.tv_macro = diagnostics::total_variation(p.values, q, ax.width());
      if (s == 0) I0 = rec.fisher_macro;
      // rates in unit time are 2r; physical time divides by beta
      const double bound = I0 * std::exp(-2.0 * r * p.time) * 1.02;
      fisher.check(rec.fisher_macro <= bound, at_time("Fisher", rec.t, rec.fisher_macro, bound));
      mass.check(std::abs(p.mass() - 1.0) <= 1e-12, at_time("|mass - 1|", rec.t, std::abs(p.mass() - 1.0), 1e-12));
      recs.push_back(rec);
      if (field2) {
        const auto m2 = pde::extract_marginal(*field2);
        closure.emplace_back(rec.t, diagnostics::total_variation(m2.values, p.values, ax.width()));
      }
    }
    if (s == n) break;
    solver.step(p, dt);
    if (field2) solver2->step(*field2, dt);
  }
  write_diagnostics(dir / "diagnostics.csv", recs);
  monitors.push_back(fisher);
  monitors.push_back(mass);

  json out;
  out["grid"] = {{"n_x", cfg.n_x}, {"dt", dt * beta}, {"steps", n}, {"kind", ax.periodic ? "heat_torus" : "drift_line"}};
  out["r"] = r / beta;
  out["expected_fisher_rate"] = 2.0 * r / beta;
  const double hi = cfg.fit_t_hi < 0 ? cfg.t_end : cfg.fit_t_hi;
  out["fits"] = fits_for(recs, cfg.fit_t_lo, hi);
  if (!closure.empty()) {
    csv::Writer w((dir / "marginal_closure.csv").string(), {"t", "l1"});
    double worst = 0.0;
    for (auto [t, l1] : closure) {
      w.cell(t).cell(l1);
      w.end_row();
      worst = std::max(worst, l1);
    }
    out["marginal_closure"] = {{"max_l1", worst}, {"n_y", cfg.n_y}};
    Monitor mc{"marginal_closure_l1", false};
    mc.check(worst <= 1e-3, "max L1 = " + fmt_real(worst));
    monitors.push_back(mc);
  }
  return out;
}

// ---------------------------------------------------------------- particles

json run_particles(const ExperimentConfig& cfg, const fields::ModelProblem& model, const fs::path& dir,
                   WorkerPool* pool, std::vector<Monitor>& monitors) {
  particles::InitOptions init;
  if (cfg.init == "uniform") init.kind = particles::InitKind::uniform;
  else if (cfg.init == "gibbs") init.kind = particles::InitKind::gibbs;
  else if (cfg.init == "equilibrium") init.kind = particles::InitKind::equilibrium;
  else init.kind = particles::InitKind::point;
  init.point = {cfg.init_x, cfg.init_y};

  auto ensemble = particles::init_ensemble(model, cfg.n_particles, init, *cfg.seed);
  particles::SimulationOptions so;
  so.scheme = cfg.run_kind == RunKind::particles_metric ? particles::Scheme::metric : particles::Scheme::plain;
  so.n_bins = cfg.n_bins;
  so.tau = cfg.tau;
  so.interpolate = cfg.interpolate_bias;
  so.track_ito = cfg.track_ito;
  so.ito_stride = cfg.ito_stride;
  json warnings = ensemble.warnings;
  particles::AbfParticleSimulation sim(model, std::move(ensemble), so);

  const Axis bins = model.z_axis(cfg.n_bins);
  const bool linear = model.xi.kind == fields::XiKind::linear_x;
  const auto q = equilibrium_marginal_bins(model, bins);
  std::vector<double> a_oracle;
  if (linear) a_oracle = oracle_bin_average(model, bins);

  const double dt = cfg.dt > 0.0 ? cfg.dt : 1e-3;
  const std::size_t n = steps_for(cfg.t_end, dt);
  const double dt_used = cfg.t_end / static_cast<double>(n);

  // TV checkpoints at t_end 2^-m, m = 0..9.
  std::set<std::size_t> checkpoints;
  for (int m = 0; m <= 9; ++m)
    checkpoints.insert(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::ldexp(double(n), -m)))));
  std::vector<std::pair<double, double>> tv_points;

  std::vector<diagnostics::Record> recs;
  std::size_t empty_steps = 0;
  auto hist_tv = [&]() {
    const auto h = particles::empirical_marginal(sim.ensemble(), bins, model);
    return std::pair{h, diagnostics::total_variation(h.values, q, bins.width())};
  };
  for (std::size_t s = 0; s <= n; ++s) {
    const bool due = record_due(s, n, cfg.output_stride);
    if (due || checkpoints.count(s)) {
      const auto [h, tv] = hist_tv();
      if (checkpoints.count(s)) tv_points.emplace_back(sim.ensemble().time, tv);
      if (due) {
        diagnostics::Record r;
        r.t = sim.ensemble().time;
        r.E_macro = diagnostics::relative_entropy(h.values, q, bins.width());
        r.tv_macro = tv;
        if (linear) r.force_error_sq = diagnostics::force_error(sim.profile().force, a_oracle, h.values, bins);
        r.empty_bins = s == 0 ? cfg.n_bins : sim.profile().empty_bins;
        recs.push_back(r);
      }
    }
    if (cfg.snapshot_stride > 0 && (s % cfg.snapshot_stride == 0 || s == n)) {
      char name[64];
      std::snprintf(name, sizeof name, "particles_%08zu.csv", s);
      particles::write_snapshot_csv((dir / "snapshots" / name).string(), sim.ensemble());
    }
    if (s == n) break;
    sim.advance(dt_used, pool);
    if (sim.profile().empty_bins > 0) ++empty_steps;
  }
  if (cfg.tau == 0.0) sim.refresh_bias(pool);
  write_diagnostics(dir / "diagnostics.csv", recs);
  particles::write_bias_csv((dir / "bias_final.csv").string(), sim.profile());

  json out;
  out["warnings"] = warnings;
  out["dt"] = dt_used;
  out["steps"] = n;
  out["steps_with_empty_bins"] = empty_steps;

  // TV: nonincreasing across checkpoints up to the multinomial noise scale, and final below the floor.
  const double N = static_cast<double>(cfg.n_particles);
  const double slack = std::sqrt(static_cast<double>(cfg.n_bins) / N);
  const double floor = 0.06 * std::sqrt((cfg.n_bins / 32.0) / (N / 1e5));
  Monitor tv_dec{"tv_nonincreasing", false};
  Monitor tv_fin{"tv_final_below_floor", false};
  json tvj = json::array();
  for (std::size_t i = 0; i < tv_points.size(); ++i) {
    tvj.push_back({{"t", tv_points[i].first}, {"tv", tv_points[i].second}});
    if (i > 0)
      tv_dec.check(tv_points[i].second <= tv_points[i - 1].second + slack,
                   at_time("TV rose", tv_points[i].first, tv_points[i].second, tv_points[i - 1].second + slack));
  }
  tv_fin.check(tv_points.back().second < floor, at_time("final TV", tv_points.back().first, tv_points.back().second, floor));
  out["tv_checkpoints"] = tvj;
  out["tv_floor"] = floor;
  out["tv_slack"] = slack;
  monitors.push_back(tv_dec);
  monitors.push_back(tv_fin);

  const auto stats = particles::bin_statistics(sim.ensemble(), model, bins, pool);
  json bias;
  std::size_t within = 0;
  for (std::size_t b = 0; b < cfg.n_bins; ++b) {
    bias["bin_lo"].push_back(bins.edge(b));
    bias["bin_hi"].push_back(bins.edge(b + 1));
    bias["force"].push_back(sim.profile().force[b]);
    bias["occupancy"].push_back(sim.profile().occupancy[b]);
    bias["stderr"].push_back(finite_or_null(stats.stderr_[b]));
    bias["residual"].push_back(0.0);
    if (linear && std::isfinite(stats.stderr_[b]) && std::abs(stats.mean[b] - a_oracle[b]) <= 3.0 * stats.stderr_[b])
      ++within;
  }
  if (linear) {
    bias["oracle"] = a_oracle;
    out["bias_bins_within_3se"] = within;
    Monitor bm{"bias_within_3se", false};
    const std::size_t need = cfg.n_bins - cfg.n_bins / 16;
    bm.check(within >= need, std::to_string(within) + " of " + std::to_string(cfg.n_bins) + " bins within 3 SE");
    monitors.push_back(bm);
  }
  out["bias"] = bias;

  if (cfg.track_ito) {
    const auto& ito = sim.ito();
    json ij;
    Monitor im{"ito_estimator_agreement", false};
    std::size_t ok = 0, occupied = 0;
    for (std::size_t b = 0; b < cfg.n_bins; ++b) {
      const double se = ito.stderr_diff(b);
      ij["mean_ito"].push_back(finite_or_null(ito.mean_ito(b)));
      ij["mean_f"].push_back(finite_or_null(ito.mean_f(b)));
      ij["stderr_diff"].push_back(finite_or_null(se));
      ij["count"].push_back(ito.count[b]);
      if (ito.count[b] < 2) continue;
      ++occupied;
      const double d = std::abs(ito.mean_ito(b) - ito.mean_f(b));
      // se == 0 happens when the estimator is exact sample by sample (xi = x)
      if (d <= 3.0 * se || d <= 1e-9 * (1.0 + std::abs(ito.mean_f(b)))) ++ok;
      else im.check(false, "bin " + std::to_string(b) + ": |diff| = " + fmt_real(d) + " > 3 SE = " + fmt_real(3 * se));
    }
    ij["bins_agreeing"] = ok;
    ij["bins_occupied"] = occupied;
    out["ito"] = ij;
    monitors.push_back(im);
  }
  const double hi = cfg.fit_t_hi < 0 ? cfg.t_end : cfg.fit_t_hi;
  out["fits"] = fits_for(recs, cfg.fit_t_lo, hi);
  out["final"] = {{"t", recs.back().t}, {"tv_macro", recs.back().tv_macro}, {"E_macro", recs.back().E_macro},
                  {"force_error_sq", finite_or_null(recs.back().force_error_sq)}};
  return out;
}

// ---------------------------------------------------------------- compare helpers

void flatten(const json& j, const std::string& prefix, std::map<std::string, double>& out) {
  if (j.is_number()) {
    out[prefix] = j.get<double>();
  } else if (j.is_boolean()) {
    out[prefix] = j.get<bool>() ? 1.0 : 0.0;
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "config" || it.key() == "monitors") continue;
      flatten(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  }
}

std::optional<json> load_summary(const std::string& dir, std::vector<std::string>& problems) {
  const fs::path p = fs::path(dir) / "summary.json";
  if (!fs::exists(p)) {
    problems.push_back("missing " + p.string());
    return std::nullopt;
  }
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    problems.push_back("corrupt " + p.string() + ": " + e.what());
    return std::nullopt;
  }
}

double num_or_nan(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  auto table = keys(cfg);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_kind = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key " + key);
    auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + key);
    it->set(value);
    if (key == "run_kind") have_kind = true;
  }
  if (!have_kind) throw ConfigError("run_kind is required");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string echo(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out;
  for (const auto& k : keys(copy)) out += k.name + "=" + k.get() + "\n";
  return out;
}

void validate(const ExperimentConfig& cfg) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(cfg.beta > 0.0, "beta must be positive");
  need(cfg.k > 0.0, "k must be positive");
  need(cfg.t_end > 0.0, "t_end must be positive");
  need(cfg.dt >= 0.0, "dt must be nonnegative (0 selects the default)");
  need(cfg.tau >= 0.0, "tau must be nonnegative");
  need(cfg.threads >= 1, "threads must be at least 1");
  need(cfg.n_bins >= 1, "n_bins must be at least 1");
  need(cfg.n_z >= 4, "n_z must be at least 4");
  need(cfg.y_half_width >= 0.0, "y_half_width must be nonnegative");
  need(cfg.xi == "x" || cfg.xi == "parabolic", "xi must be x or parabolic");
  need(cfg.torus || cfg.x_hi > cfg.x_lo, "interval needs x_lo < x_hi");
  need(cfg.torus || cfg.alpha > 0.0, "interval needs alpha > 0");
  need(cfg.init_y_sd > 0.0 && cfg.line_sd > 0.0, "initial widths must be positive");
  need(cfg.pde_init == "product" || cfg.pde_init == "equilibrium", "pde_init must be product or equilibrium");
  need(cfg.init == "uniform" || cfg.init == "gibbs" || cfg.init == "equilibrium" || cfg.init == "point",
       "init must be uniform, gibbs, equilibrium or point");
  need(std::abs(cfg.init_amplitude) < 1.0, "init_amplitude must lie in (-1, 1)");
  if (cfg.xi == "parabolic") {
    need(is_particles(cfg.run_kind), "xi = parabolic is only supported by particle runs");
    need(cfg.torus, "xi = parabolic needs the torus");
  }
  if (is_particles(cfg.run_kind)) {
    need(cfg.seed.has_value(), "particle runs need a seed");
    need(cfg.n_particles >= 1, "n_particles must be at least 1");
    need(!cfg.track_ito || cfg.run_kind == RunKind::particles_metric, "track_ito needs the metric scheme");
    need(!cfg.track_ito || cfg.torus, "track_ito needs W = 0 (torus)");
  }
  if (is_pde(cfg.run_kind) || cfg.run_kind == RunKind::marginal_only) {
    need(cfg.n_x >= 4 && cfg.n_y >= 2, "PDE grids need n_x >= 4 and n_y >= 2");
  }
  if (cfg.run_kind == RunKind::marginal_only && cfg.cross_check_2d)
    need(cfg.torus, "cross_check_2d compares against the heat equation and needs the torus");
}

fields::ModelProblem build_model(const ExperimentConfig& cfg) {
  fields::TestModelOptions o;
  o.beta = cfg.beta;
  o.y_half_width = cfg.y_half_width;
  o.interval = !cfg.torus;
  o.x_lo = cfg.x_lo;
  o.x_hi = cfg.x_hi;
  o.alpha = cfg.alpha;
  auto model = fields::make_test_model({cfg.c, cfg.a, cfg.k}, o);
  if (cfg.xi == "parabolic") {
    const double b = cfg.xi_b;
    model.xi.kind = fields::XiKind::custom;
    model.xi.custom.value = [b](Vec2 q) { return q.x + b * q.y * q.y; };
    model.xi.custom.gradient = [b](Vec2 q) { return Vec2{1.0, 2.0 * b * q.y}; };
    model.xi.custom.hessian = [b](Vec2) { return Mat2{{{{0.0, 0.0}, {0.0, 2.0 * b}}}}; };
  }
  fields::validate(model);
  return model;
}

RunResult run(ExperimentConfig cfg, const RunOptions& options) {
  if (options.seed) cfg.seed = options.seed;
  if (options.threads) cfg.threads = *options.threads;
  validate(cfg);
  const auto model = build_model(cfg);
  WorkerPool pool(cfg.threads);

  // Everything that can be checked before writing is checked here.
  std::optional<PdePlan> plan;
  if (is_pde(cfg.run_kind)) plan = plan_pde(cfg, model, &pool);
  if (cfg.run_kind == RunKind::marginal_only && !cfg.torus && cfg.cross_check_2d)
    throw ConfigError("cross_check_2d needs the torus");

  RunResult result;
  result.out_dir = prepare_out_dir(cfg, options);
  const fs::path dir(result.out_dir);
  write_text(dir / "config_echo.txt", echo(cfg));

  std::vector<Monitor> monitors;
  json s;
  const auto t0 = std::chrono::steady_clock::now();
  if (model.xi.kind == fields::XiKind::linear_x) s = run_oracle(cfg, model, dir, &pool, monitors);
  switch (cfg.run_kind) {
    case RunKind::oracle_only: break;
    case RunKind::pde_abf_metric:
    case RunKind::pde_abf_plain:
    case RunKind::pde_frozen: s.update(run_pde(cfg, model, *plan, dir, &pool, monitors)); break;
    case RunKind::marginal_only: s.update(run_marginal(cfg, model, dir, &pool, monitors)); break;
    case RunKind::particles_metric:
    case RunKind::particles_plain: s.update(run_particles(cfg, model, dir, &pool, monitors)); break;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!s.contains("constants") && model.split && cfg.run_kind != RunKind::marginal_only) {
    try {
      const auto k = fields::convergence_constants(model);
      s["constants"] = constants_json(k);
      s["lambda"] = k.lambda;
    } catch (const Error& e) {
      s["constants_error"] = e.what();
    }
  }
  s["run_kind"] = to_string(cfg.run_kind);
  s["beta"] = cfg.beta;
  s["seconds"] = secs;
  std::map<std::string, std::string> echoed;
  for (const auto& k : keys(cfg)) echoed[k.name] = k.get();
  s["config"] = echoed;
  json mj = json::array();
  bool fatal_failed = false;
  for (const auto& m : monitors) {
    mj.push_back(m.to_json());
    if (m.fatal && !m.passed) fatal_failed = true;
  }
  s["monitors"] = mj;
  s["passed"] = !fatal_failed;
  write_text(dir / "summary.json", s.dump(2) + "\n");
  result.summary = s;
  result.exit_code = fatal_failed ? 1 : 0;
  return result;
}

CompareReport compare_runs(const std::string& dir_a, const std::string& dir_b, std::optional<double> tolerance) {
  CompareReport rep;
  const auto a = load_summary(dir_a, rep.problems);
  const auto b = load_summary(dir_b, rep.problems);
  if (!a || !b) {
    rep.exit_code = 2;
    return rep;
  }
  std::map<std::string, double> fa, fb;
  flatten(*a, "", fa);
  flatten(*b, "", fb);
  fa.erase("seconds");
  fb.erase("seconds");
  char line[256];
  std::snprintf(line, sizeof line, "%-40s %24s %24s %14s %12s", "metric", "a", "b", "delta", "ratio");
  rep.rows.push_back(line);
  for (const auto& [key, va] : fa) {
    const auto it = fb.find(key);
    if (it == fb.end()) continue;
    const double vb = it->second;
    const double d = vb - va;
    if (std::isfinite(d)) rep.max_abs_delta = std::max(rep.max_abs_delta, std::abs(d));
    std::snprintf(line, sizeof line, "%-40s %24.16e %24.16e %14.6e %12.6g", key.c_str(), va, vb, d,
                  va != 0.0 ? vb / va : std::nan(""));
    rep.rows.push_back(line);
  }
  for (const auto& [key, vb] : fb)
    if (!fa.count(key)) rep.rows.push_back(key + ": only in b");
  for (const auto& [key, va] : fa)
    if (!fb.count(key)) rep.rows.push_back(key + ": only in a");

  // Bias agreement within 3 (SE + residual) per bin.
  if (a->contains("bias") && b->contains("bias")) {
    const auto& ba = (*a)["bias"];
    const auto& bb = (*b)["bias"];
    if (ba.contains("force") && bb.contains("force") && ba["force"].size() == bb["force"].size()) {
      rep.bias_bins = ba["force"].size();
      for (std::size_t i = 0; i < rep.bias_bins; ++i) {
        auto err = [&](const json& j, const char* k) {
          return j.contains(k) ? std::max(0.0, num_or_nan(j[k][i])) : 0.0;
        };
        const double tol = 3.0 * (err(ba, "stderr") + err(bb, "stderr") + err(ba, "residual") + err(bb, "residual"));
        const double d = std::abs(num_or_nan(ba["force"][i]) - num_or_nan(bb["force"][i]));
        if (d <= tol) ++rep.bias_bins_within;
      }
      rep.rows.push_back("bias bins within 3 (SE + residual): " + std::to_string(rep.bias_bins_within) + " of " +
                         std::to_string(rep.bias_bins));
    } else {
      rep.rows.push_back("bias arrays differ in length; per-bin check skipped");
    }
  }
  if (a->contains("marginal_closure") && b->contains("marginal_closure")) {
    const double ea = num_or_nan((*a)["marginal_closure"]["max_l1"]);
    const double eb = num_or_nan((*b)["marginal_closure"]["max_l1"]);
    std::snprintf(line, sizeof line, "marginal closure error ratio (a / b): %.6g", ea / eb);
    rep.rows.push_back(line);
  }
  if (tolerance && rep.max_abs_delta > *tolerance) rep.exit_code = 1;
  return rep;
}

std::vector<std::string> rates(const std::string& dir) {
  const fs::path p = fs::path(dir) / "diagnostics.csv";
  const auto table = csv::read(p.string());
  const auto t = table.column("t");
  std::vector<std::string> out;
  std::ostringstream gp;
  gp << "# gnuplot script for " << p.filename().string() << "\n"
     << "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 't'\n";
  std::string plots;
  char line[256];
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (name == "empty_bins") continue;
    const auto v = table.column(name);
    try {
      const auto f = diagnostics::fit_decay_rate(t, v);
      std::snprintf(line, sizeof line, "%-16s rate %.10g  r^2 %.6f  points %zu%s", name.c_str(), f.rate, f.r_squared,
                    f.points, f.truncated ? "  (window truncated)" : "");
      out.push_back(line);
      if (!plots.empty()) plots += ", \\\n     ";
      plots += "'diagnostics.csv' using 1:" + std::to_string(c + 1) + " with lines";
    } catch (const Error& e) {
      out.push_back(name + ": " + e.what());
    }
  }
  if (!plots.empty()) gp << "plot " << plots << "\n";
  write_text(fs::path(dir) / "rates.gp", gp.str());
  return out;
}

}  // namespace abflab::harness
