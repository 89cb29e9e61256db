#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "abflab/oracle.hpp"
#include "abflab/types.hpp"

namespace abflab::diagnostics {

constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// Sum of (p ln(p/q) - p + q) w over cells; equals sum p ln(p/q) w when both
/// carry the same mass. Returns +inf if p > 0 where q <= 0 and reports that
/// cell through `violation` when given.
double relative_entropy(const std::vector<double>& p, const std::vector<double>& q, double cell_measure,
                        std::size_t* violation = nullptr);

/// sum |p - q| w, in [0, 2] for probability densities.
double total_variation(const std::vector<double>& p, const std::vector<double>& q, double cell_measure);

/// sum |d ln(p/q)|^2 p h with centred differences (periodic wrap or one-sided ends).
double fisher_information(const std::vector<double>& p, const std::vector<double>& q, const Axis& axis);

/// Fisher information of the slices along y only, weighted by the cell area.
double fisher_information_y(const DensityField& p, const DensityField& q);

struct EntropyParts {
  double E_total = 0.0;
  double E_macro = 0.0;
  double E_micro = 0.0;
  /// Mass in slices skipped for falling under the floor.
  double excluded_mass = 0.0;
  bool valid = true;
};

/// E_total from the 2D cells; E_macro from column marginals of both fields;
/// E_micro as the marginal-weighted sum of slice entropies.
EntropyParts entropy_decomposition(const DensityField& field, const DensityField& equilibrium,
                                   double mass_floor = 1e-30);

/// sum (a - b)^2 m w over cell centres of `axis` where b is the oracle A' interpolated linearly.
double force_error(const std::vector<double>& force, const oracle::FreeEnergyProfile& oracle,
                   const std::vector<double>& marginal, const Axis& axis);
/// Same with the oracle given at the cell centres.
double force_error(const std::vector<double>& force, const std::vector<double>& oracle_at_centres,
                   const std::vector<double>& marginal, const Axis& axis);

struct RateFit {
  double rate = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
  bool truncated = false;
};

/// Least-squares slope of ln(value) on [t_lo, t_hi], returned as a positive decay rate.
/// The window is cut at the first nonpositive value; fewer than 5 points throws Error.
RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& value, double t_lo = -1e300,
                       double t_hi = 1e300);

/// Convergence bound C e^{-lambda t} for sqrt(E_micro) with
/// C = 2 max(sqrt(E_m0), M / (beta^-1 |rho m^-2 - r|) sqrt(I0 / (2 rho))).
/// When rho m^-2 = r the bound is (sqrt(E_m0) + M sqrt(I0 / (2 rho)) t) e^{-beta^-1 r t}.
double micro_entropy_bound(double t, double E_m0, double I0, double M, double rho, double m, double r, double beta);

struct Record {
  double t = 0.0;
  double E_total = kNotApplicable;
  double E_macro = kNotApplicable;
  double E_micro = kNotApplicable;
  double fisher_macro = kNotApplicable;
  double tv_macro = kNotApplicable;
  double force_error_sq = kNotApplicable;
  std::size_t empty_bins = 0;
};

std::vector<std::string> record_header();

}  // namespace abflab::diagnostics
