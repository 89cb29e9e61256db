#include "abflab/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "abflab/errors.hpp"

namespace abflab::diagnostics {

namespace {

/// q * h(p/q) with h(u) = u ln u - u + 1, evaluated without cancellation near u = 1.
double h_term(double p, double q) {
  if (p == 0.0) return q;
  const double d = (p - q) / q;
  if (std::abs(d) < 1e-3) {
    // h(1 + d) = sum_{n>=2} (-1)^n d^n / (n (n - 1))
    double term = d * d;
    double s = 0.0;
    for (int n = 2; n < 12; ++n) {
      s += ((n % 2 == 0) ? 1.0 : -1.0) * term / (n * (n - 1.0));
      term *= d;
    }
    return q * s;
  }
  return p * std::log(p / q) - p + q;
}

double log_ratio(double p, double q) { return std::log(p) - std::log(q); }

}  // namespace

double relative_entropy(const std::vector<double>& p, const std::vector<double>& q, double cell_measure,
                        std::size_t* violation) {
  if (p.size() != q.size()) throw Error("relative_entropy: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && !(q[i] > 0.0)) {
      if (violation) *violation = i;
      std::cerr << "relative_entropy: support violation at cell " << i << '\n';
      return std::numeric_limits<double>::infinity();
    }
    if (q[i] > 0.0) s += h_term(p[i], q[i]);
  }
  return s * cell_measure;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q, double cell_measure) {
  if (p.size() != q.size()) throw Error("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s * cell_measure;
}

double fisher_information(const std::vector<double>& p, const std::vector<double>& q, const Axis& axis) {
  const std::size_t n = p.size();
  if (n != q.size() || n != axis.n) throw Error("fisher_information: size mismatch");
  if (n < 2) return 0.0;
  std::vector<double> lr(n);
  for (std::size_t i = 0; i < n; ++i) {
    // The discrete gradient of ln(p/q) needs both densities positive everywhere.
    if (!(q[i] > 0.0) || !(p[i] > 0.0)) return std::numeric_limits<double>::infinity();
    lr[i] = log_ratio(p[i], q[i]);
  }
  const double h = axis.width();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double g;
    if (axis.periodic)
      g = (lr[(i + 1) % n] - lr[(i + n - 1) % n]) / (2.0 * h);
    else if (i == 0)
      g = (lr[1] - lr[0]) / h;
    else if (i + 1 == n)
      g = (lr[n - 1] - lr[n - 2]) / h;
    else
      g = (lr[i + 1] - lr[i - 1]) / (2.0 * h);
    s += g * g * p[i];
  }
  return s * h;
}

double fisher_information_y(const DensityField& p, const DensityField& q) {
  const auto& g = p.grid;
  if (!(g == q.grid)) throw Error("fisher_information_y: grid mismatch");
  const std::size_t ny = g.y.n;
  std::vector<double> pc(ny);
  std::vector<double> qc(ny);
  double s = 0.0;
  for (std::size_t i = 0; i < g.x.n; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      pc[j] = p.at(i, j);
      qc[j] = q.at(i, j);
    }
    s += fisher_information(pc, qc, g.y);
  }
  return s * g.x.width();
}

EntropyParts entropy_decomposition(const DensityField& field, const DensityField& equilibrium, double mass_floor) {
  const auto& g = field.grid;
  if (!(g == equilibrium.grid)) throw Error("entropy_decomposition: grid mismatch");
  const std::size_t nx = g.x.n;
  const std::size_t ny = g.y.n;
  const double hx = g.x.width();
  const double hy = g.y.width();

  EntropyParts out;
  out.E_total = relative_entropy(field.values, equilibrium.values, hx * hy);

  std::vector<double> pm(nx);
  std::vector<double> qm(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      a += field.at(i, j);
      b += equilibrium.at(i, j);
    }
    pm[i] = a * hy;
    qm[i] = b * hy;
  }
  out.E_macro = relative_entropy(pm, qm, hx);

  std::vector<double> pc(ny);
  std::vector<double> qc(ny);
  double micro = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    if (!(pm[i] > mass_floor) || !(qm[i] > mass_floor)) {
      out.excluded_mass += pm[i] * hx;
      continue;
    }
    for (std::size_t j = 0; j < ny; ++j) {
      pc[j] = field.at(i, j) / pm[i];
      qc[j] = equilibrium.at(i, j) / qm[i];
    }
    micro += relative_entropy(pc, qc, hy) * pm[i];
  }
  out.E_micro = micro * hx;
  out.valid = out.excluded_mass <= 0.01 * field.mass();
  return out;
}

double force_error(const std::vector<double>& force, const std::vector<double>& oracle_at_centres,
                   const std::vector<double>& marginal, const Axis& axis) {
  if (force.size() != axis.n || oracle_at_centres.size() != axis.n || marginal.size() != axis.n)
    throw Error("force_error: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < axis.n; ++i) {
    const double d = force[i] - oracle_at_centres[i];
    s += d * d * marginal[i];
  }
  return s * axis.width();
}

double force_error(const std::vector<double>& force, const oracle::FreeEnergyProfile& oracle,
                   const std::vector<double>& marginal, const Axis& axis) {
  std::vector<double> o(axis.n);
  for (std::size_t i = 0; i < axis.n; ++i) o[i] = oracle.Aprime_at(axis.center(i));
  return force_error(force, o, marginal, axis);
}

RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& value, double t_lo, double t_hi) {
  if (t.size() != value.size()) throw Error("fit_decay_rate: size mismatch");
  RateFit fit;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(value[i] > 0.0) || !std::isfinite(value[i])) {
      fit.truncated = true;
      break;
    }
    xs.push_back(t[i]);
    ys.push_back(std::log(value[i]));
  }
  fit.points = xs.size();
  if (xs.size() < 5) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "fit_decay_rate: only %zu usable points in the window", xs.size());
    throw Error(buf);
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw Error("fit_decay_rate: degenerate time window");
  const double slope = sxy / sxx;
  fit.rate = -slope;
  // A flat series is fitted exactly by a zero slope.
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

double micro_entropy_bound(double t, double E_m0, double I0, double M, double rho, double m, double r, double beta) {
  const double a = rho / (m * m);
  const double lambda = std::min(a, r) / beta;
  const double tail = M * std::sqrt(I0 / (2.0 * rho));
  if (a == r) return (std::sqrt(E_m0) + tail * t) * std::exp(-r * t / beta);
  const double C = 2.0 * std::max(std::sqrt(E_m0), tail / (std::abs(a - r) / beta));
  return C * std::exp(-lambda * t);
}

std::vector<std::string> record_header() {
  return {"t", "E_total", "E_macro", "E_micro", "fisher_macro", "tv_macro", "force_error_sq", "empty_bins"};
}

}  // namespace abflab::diagnostics
