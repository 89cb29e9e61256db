#include "abflab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "abflab/errors.hpp"

namespace abflab::oracle {

namespace {

void require_linear_x(const fields::ModelProblem& model) {
  if (model.xi.kind != fields::XiKind::linear_x)
    throw ModelAssumptionError("slice quadrature is only available for xi(x, y) = x");
}

}  // namespace

double FreeEnergyProfile::Aprime_at(double zq) const {
  if (z.empty()) return 0.0;
  if (zq <= z.front()) return Aprime.front();
  if (zq >= z.back()) return Aprime.back();
  const auto it = std::upper_bound(z.begin(), z.end(), zq);
  const std::size_t k = static_cast<std::size_t>(it - z.begin());
  const double t = (zq - z[k - 1]) / (z[k] - z[k - 1]);
  return (1.0 - t) * Aprime[k - 1] + t * Aprime[k];
}

std::vector<double> profile_grid(const fields::ModelProblem& model, std::size_t n) {
  std::vector<double> z(n);
  const double lo = model.x_domain.lo;
  const double hi = model.x_domain.hi;
  for (std::size_t i = 0; i < n; ++i) z[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return z;
}

quadrature::WeightedIntegral slice_integrals(const fields::ModelProblem& model, double z,
                                             const quadrature::TrapezoidOptions& options) {
  require_linear_x(model);
  const double beta = model.beta;
  const auto& v = model.potential;
  return quadrature::weighted_trapezoid([&](double y) { return beta * v.value({z, y}); },
                                        [&](double y) { return v.gradient({z, y}).x; }, model.y_domain.lo,
                                        model.y_domain.hi, options, z);
}

double log_partition(const fields::ModelProblem& model, double z, const quadrature::TrapezoidOptions& options) {
  require_linear_x(model);
  const double beta = model.beta;
  const auto& v = model.potential;
  return quadrature::weighted_trapezoid([&](double y) { return beta * v.value({z, y}); }, nullptr,
                                        model.y_domain.lo, model.y_domain.hi, options, z)
      .log_z;
}

double mean_force(const fields::ModelProblem& model, double z, const quadrature::TrapezoidOptions& options) {
  return slice_integrals(model, z, options).mean_f;
}

FreeEnergyProfile compute_free_energy(const fields::ModelProblem& model, const std::vector<double>& z_grid,
                                      const quadrature::TrapezoidOptions& options, WorkerPool* pool) {
  require_linear_x(model);
  const std::size_t n = z_grid.size();
  FreeEnergyProfile p;
  p.z = z_grid;
  p.A.assign(n, 0.0);
  p.Aprime.assign(n, 0.0);
  p.Z_sigma.assign(n, 0.0);
  p.log_Z_sigma.assign(n, 0.0);
  parallel_for(pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto r = slice_integrals(model, z_grid[i], options);
      p.log_Z_sigma[i] = r.log_z;
      p.Z_sigma[i] = std::exp(r.log_z);
      p.Aprime[i] = r.mean_f;
    }
  });
  for (std::size_t i = 0; i < n; ++i) p.A[i] = -(p.log_Z_sigma[i] - p.log_Z_sigma[0]) / model.beta;
  return p;
}

double mean_force_consistency(const fields::ModelProblem& model, const FreeEnergyProfile& profile, double h,
                              const quadrature::TrapezoidOptions& options) {
  double worst = 0.0;
  const double beta = model.beta;
  for (std::size_t i = 0; i < profile.z.size(); ++i) {
    const double z = profile.z[i];
    auto a = [&](double s) { return -log_partition(model, z + s, options) / beta; };
    const double d = (a(-2 * h) - 8 * a(-h) + 8 * a(h) - a(2 * h)) / (12 * h);
    worst = std::max(worst, std::abs(d - profile.Aprime[i]));
  }
  return worst;
}

std::vector<double> EquilibriumDensities::conditional(std::size_t i) const {
  const auto& g = psi_inf.grid;
  std::vector<double> c(g.y.n);
  double s = 0.0;
  for (std::size_t j = 0; j < g.y.n; ++j) s += c[j] = psi_inf.at(i, j);
  const double norm = s * g.y.width();
  for (auto& v : c) v /= norm;
  return c;
}

EquilibriumDensities compute_equilibrium(const fields::ModelProblem& model, const Grid2D& grid,
                                         const quadrature::TrapezoidOptions& options, WorkerPool* pool) {
  require_linear_x(model);
  const double beta = model.beta;
  const std::size_t nx = grid.x.n;
  const std::size_t ny = grid.y.n;

  std::vector<double> log_zs(nx);
  parallel_for(pool, nx, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) log_zs[i] = log_partition(model, grid.x.center(i), options);
  });

  const double log_zxi =
      model.confinement ? quadrature::weighted_trapezoid([&](double z) { return beta * model.W(z); }, nullptr,
                                                         model.x_domain.lo, model.x_domain.hi, options)
                              .log_z
                        : std::log(model.x_domain.hi - model.x_domain.lo);

  EquilibriumDensities eq;
  eq.psi_inf.grid = grid;
  eq.psi_inf.values.assign(grid.size(), 0.0);
  eq.psi_xi_inf.axis = grid.x;
  eq.psi_xi_inf.values.assign(nx, 0.0);
  eq.Z_xi = std::exp(log_zxi);

  double z_total = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = grid.x.center(i);
    const double bw = beta * model.W(x);
    for (std::size_t j = 0; j < ny; ++j) {
      const double lp = -beta * model.potential.value({x, grid.y.center(j)}) - log_zs[i] - bw - log_zxi;
      eq.psi_inf.at(i, j) = std::exp(lp);
    }
    eq.psi_xi_inf.values[i] = std::exp(-bw - log_zxi);
    z_total += std::exp(log_zs[i]) * grid.x.width();
  }
  eq.Z = z_total;

  const double mass = eq.psi_inf.mass();
  if (!(mass > 0.0) || !std::isfinite(mass) || !std::isfinite(z_total) || !(z_total > 0.0))
    throw EvaluationError("equilibrium normalizer under/overflowed; rescale beta or the domain");
  for (auto& v : eq.psi_inf.values) v /= mass;
  return eq;
}

std::vector<double> local_mean_force_table(const fields::ModelProblem& model, const Grid2D& grid) {
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.x.n; ++i)
    for (std::size_t j = 0; j < grid.y.n; ++j)
      f[grid.index(i, j)] = fields::local_mean_force(model, {grid.x.center(i), grid.y.center(j)});
  return f;
}

double conditional_expectation_of_F(const fields::ModelProblem& model, const DensityField& field, double z,
                                    double floor) {
  require_linear_x(model);
  const auto& g = field.grid;
  const std::size_t i = g.x.locate(z);
  const double x = g.x.center(i);
  double m = 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < g.y.n; ++j) {
    const double p = field.at(i, j);
    m += p;
    s += p * fields::local_mean_force(model, {x, g.y.center(j)});
  }
  if (!(m * g.y.width() > floor)) {
    std::ostringstream os;
    os << "slice mass " << m * g.y.width() << " below floor at z = " << z;
    throw EmptySliceError(os.str(), z);
  }
  return s / m;
}

}  // namespace abflab::oracle
