#include "abflab/pde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "abflab/csv.hpp"
#include "abflab/errors.hpp"

namespace abflab::pde {

namespace {

void require_unit_beta(const fields::ModelProblem& model) {
  if (model.beta != 1.0) throw ModelAssumptionError("PDE solvers run at beta = 1; rescale with to_unit_temperature");
  if (model.xi.kind != fields::XiKind::linear_x) throw ModelAssumptionError("PDE solvers need xi(x, y) = x");
}

/// B(s) given s and e^s; the series avoids cancellation in e^s - 1 near 0.
inline double bernoulli_from_exp(double s, double es) {
  if (std::abs(s) < 1e-5) return 1.0 - 0.5 * s + s * s / 12.0;
  return s / (es - 1.0);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::abf_metric: return "abf_metric";
    case Variant::abf_plain: return "abf_plain";
    case Variant::frozen_bias: return "frozen_bias";
  }
  return "?";
}

}  // namespace

double bernoulli(double s) {
  if (std::abs(s) < 1e-5) return 1.0 - 0.5 * s + s * s / 12.0 - s * s * s * s / 720.0;
  return s / std::expm1(s);
}

FokkerPlanck2D::FokkerPlanck2D(const fields::ModelProblem& model, const Grid2D& grid, Variant variant,
                               WorkerPool* pool)
    : model_(model), grid_(grid), variant_(variant), pool_(pool) {
  require_unit_beta(model);
  if (grid.x.periodic != model.x_domain.torus) throw ConfigError("grid periodicity does not match the model");
  const std::size_t nx = grid.x.n;
  const std::size_t ny = grid.y.n;
  if (nx < 4 || ny < 2) throw ConfigError("PDE grid needs at least 4 x cells and 2 y cells");
  nxf_ = grid.x.periodic ? nx : nx - 1;

  const std::size_t n = grid.size();
  F_.resize(n);
  abs_dy_.resize(n);
  std::vector<double> v(n);
  parallel_for(pool_, nx, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        const Vec2 q{grid.x.center(i), grid.y.center(j)};
        const Vec2 g = model.potential.gradient(q);
        const std::size_t k = grid.index(i, j);
        F_[k] = g.x;
        abs_dy_[k] = std::abs(g.y);
        v[k] = model.potential.value(q);
      }
    }
  });

  w1_.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) w1_[i] = model.W1(grid.x.center(i));
  dw_.assign(nxf_, 0.0);
  dv_x_.resize(nxf_ * ny);
  edv_x_.resize(nxf_ * ny);
  for (std::size_t i = 0; i < nxf_; ++i) {
    const std::size_t ip = (i + 1) % nx;
    dw_[i] = model.W(grid.x.center(ip)) - model.W(grid.x.center(i));
    for (std::size_t j = 0; j < ny; ++j) {
      const double d = v[grid.index(ip, j)] - v[grid.index(i, j)];
      dv_x_[i * ny + j] = d;
      edv_x_[i * ny + j] = std::exp(d);
    }
  }

  const double hy2 = grid.y.width() * grid.y.width();
  by_plus_.resize(nx * (ny - 1));
  by_minus_.resize(nx * (ny - 1));
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const double s = v[grid.index(i, j + 1)] - v[grid.index(i, j)];
      const double b = bernoulli(s);
      by_plus_[i * (ny - 1) + j] = b / hy2;
      by_minus_[i * (ny - 1) + j] = b * std::exp(s) / hy2;
    }
  }

  aprime_.assign(nx, 0.0);
  fx_.resize(nxf_ * ny);
  fy_.resize(nx * (ny - 1));
}

void FokkerPlanck2D::set_bias(std::vector<double> aprime) {
  if (aprime.size() != grid_.x.n) throw ConfigError("bias size does not match the x cells");
  aprime_ = std::move(aprime);
  jumps_.clear();
}

void FokkerPlanck2D::set_bias_jumps(std::vector<double> aprime, std::vector<double> jumps) {
  if (variant_ != Variant::frozen_bias) throw ConfigError("bias jumps only apply to the frozen variant");
  if (jumps.size() != nxf_) throw ConfigError("one bias jump per x face is required");
  set_bias(std::move(aprime));
  jumps_ = std::move(jumps);
}

std::size_t FokkerPlanck2D::estimate_bias(const DensityField& field) {
  const std::size_t ny = grid_.y.n;
  std::size_t held = 0;
  for (std::size_t i = 0; i < grid_.x.n; ++i) {
    double m = 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = grid_.index(i, j);
      m += field.values[k];
      s += field.values[k] * F_[k];
    }
    if (m * grid_.y.width() > mass_floor)
      aprime_[i] = s / m;
    else
      ++held;
  }
  return held;
}

double FokkerPlanck2D::drift_bound(const std::vector<double>& aprime) const {
  double d = 0.0;
  for (std::size_t i = 0; i < grid_.x.n; ++i) {
    const double shift = aprime[i] - w1_[i];
    for (std::size_t j = 0; j < grid_.y.n; ++j) {
      const std::size_t k = grid_.index(i, j);
      d = std::max(d, std::abs(F_[k] - shift) + abs_dy_[k]);
    }
  }
  return d;
}

double FokkerPlanck2D::admissible_dt() const {
  const double h = std::min(grid_.x.width(), grid_.y.width());
  return h * h / (4.0 + 2.0 * drift_bound(aprime_) * h);
}

double FokkerPlanck2D::worst_case_dt() const {
  if (variant_ == Variant::frozen_bias) return admissible_dt();
  double d = 0.0;
  for (std::size_t i = 0; i < grid_.x.n; ++i) {
    double lo = F_[grid_.index(i, 0)];
    double hi = lo;
    double dy = 0.0;
    for (std::size_t j = 0; j < grid_.y.n; ++j) {
      const std::size_t k = grid_.index(i, j);
      lo = std::min(lo, F_[k]);
      hi = std::max(hi, F_[k]);
      dy = std::max(dy, abs_dy_[k]);
    }
    d = std::max(d, (hi - lo) + std::abs(w1_[i]) + dy);
  }
  const double h = std::min(grid_.x.width(), grid_.y.width());
  return h * h / (4.0 + 2.0 * d * h);
}

void FokkerPlanck2D::step(DensityField& field, double dt) {
  if (!(field.grid == grid_)) throw ConfigError("field grid does not match the solver grid");
  if (variant_ != Variant::frozen_bias) estimate_bias(field);
  const double adm = admissible_dt();
  if (!(dt > 0.0) || dt > adm * (1.0 + 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "dt = " << dt << " violates the CFL bound; admissible dt = " << adm;
    throw CflError(os.str(), adm);
  }

  const std::size_t nx = grid_.x.n;
  const std::size_t ny = grid_.y.n;
  const double hx = grid_.x.width();
  const double hx2 = hx * hx;

  // Bias potential jump per x face: fourth-order integral of the centred A' values.
  std::vector<double> eshift(nxf_);
  std::vector<double> shift(nxf_);
  for (std::size_t i = 0; i < nxf_; ++i) {
    const std::size_t ip = (i + 1) % nx;
    double da;
    if (!jumps_.empty()) {
      da = jumps_[i];
    } else if (grid_.x.periodic) {
      const std::size_t im = (i + nx - 1) % nx;
      const std::size_t ipp = (i + 2) % nx;
      da = hx * (-aprime_[im] + 13.0 * aprime_[i] + 13.0 * aprime_[ip] - aprime_[ipp]) / 24.0;
    } else if (i == 0 || i + 2 >= nx) {
      da = 0.5 * hx * (aprime_[i] + aprime_[ip]);
    } else {
      da = hx * (-aprime_[i - 1] + 13.0 * aprime_[i] + 13.0 * aprime_[ip] - aprime_[i + 2]) / 24.0;
    }
    shift[i] = dw_[i] - da;
    eshift[i] = std::exp(shift[i]);
  }

  const std::vector<double>& p = field.values;
  parallel_for(pool_, nxf_, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t ip = (i + 1) % nx;
      for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t f = i * ny + j;
        const double s = dv_x_[f] + shift[i];
        const double es = edv_x_[f] * eshift[i];
        const double bp = bernoulli_from_exp(s, es);
        fx_[f] = (bp * p[grid_.index(i, j)] - bp * es * p[grid_.index(ip, j)]) / hx2;
      }
    }
  });
  parallel_for(pool_, nx, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j + 1 < ny; ++j) {
        const std::size_t f = i * (ny - 1) + j;
        fy_[f] = by_plus_[f] * p[grid_.index(i, j)] - by_minus_[f] * p[grid_.index(i, j + 1)];
      }
    }
  });

  std::atomic<bool> negative = false;
  parallel_for(pool_, nx, [&](std::size_t b, std::size_t e) {
    bool neg = false;
    for (std::size_t i = b; i < e; ++i) {
      const bool has_left = grid_.x.periodic || i > 0;
      const bool has_right = grid_.x.periodic || i + 1 < nx;
      const std::size_t il = (i + nx - 1) % nx;
      for (std::size_t j = 0; j < ny; ++j) {
        double div = 0.0;
        if (has_right) div += fx_[i * ny + j];
        if (has_left) div -= fx_[il * ny + j];
        if (j + 1 < ny) div += fy_[i * (ny - 1) + j];
        if (j > 0) div -= fy_[i * (ny - 1) + j - 1];
        double& v = field.values[grid_.index(i, j)];
        v -= dt * div;
        neg = neg || v < 0.0;
      }
    }
    if (neg) negative = true;
  });
  if (negative) throw NegativeDensityError("negative density after step; CFL logic failed");
  field.time += dt;
}

void fp2d_step(DensityField& field, const fields::ModelProblem& model, particles::BiasProfile& profile, double dt,
               Variant variant, WorkerPool* pool) {
  FokkerPlanck2D solver(model, field.grid, variant, pool);
  const Axis& x = field.grid.x;
  if (variant == Variant::frozen_bias) {
    std::vector<double> a(x.n);
    for (std::size_t i = 0; i < x.n; ++i) a[i] = profile.lookup(x.center(i));
    solver.set_bias(std::move(a));
  } else {
    if (!(profile.bins == x)) throw ConfigError("bias bins must coincide with the PDE x cells");
    solver.set_bias(profile.force);
  }
  solver.step(field, dt);
  if (variant != Variant::frozen_bias) {
    profile.force = solver.bias();
    profile.occupancy.assign(x.n, 0);
  }
}

FokkerPlanck1D::FokkerPlanck1D(const fields::ModelProblem& model, const Axis& axis, MarginalKind kind)
    : axis_(axis), kind_(kind) {
  if (model.beta != 1.0) throw ModelAssumptionError("PDE solvers run at beta = 1; rescale with to_unit_temperature");
  if (kind == MarginalKind::heat_torus && !axis.periodic) throw ConfigError("heat_torus needs a periodic axis");
  if (kind == MarginalKind::drift_line && axis.periodic) throw ConfigError("drift_line needs an interval axis");
  if (axis.n < 3) throw ConfigError("1D grid needs at least 3 cells");
  const std::size_t nf = axis.periodic ? axis.n : axis.n - 1;
  const double h2 = axis.width() * axis.width();
  bp_.resize(nf);
  bm_.resize(nf);
  flux_.resize(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    double s = 0.0;
    if (kind == MarginalKind::drift_line) s = model.W(axis.center(i + 1)) - model.W(axis.center(i));
    const double b = bernoulli(s);
    bp_[i] = b / h2;
    bm_[i] = b * std::exp(s) / h2;
  }
  if (kind == MarginalKind::drift_line)
    for (std::size_t i = 0; i < axis.n; ++i) max_w1_ = std::max(max_w1_, std::abs(model.W1(axis.center(i))));
}

double FokkerPlanck1D::admissible_dt() const {
  const double h = axis_.width();
  return h * h / (2.0 + 2.0 * max_w1_ * h);
}

void FokkerPlanck1D::step(Density1D& field, double dt) {
  if (!(field.axis == axis_)) throw ConfigError("field axis does not match the solver axis");
  const double adm = admissible_dt();
  if (!(dt > 0.0) || dt > adm * (1.0 + 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "dt = " << dt << " violates the CFL bound; admissible dt = " << adm;
    throw CflError(os.str(), adm);
  }
  const std::size_t n = axis_.n;
  const std::size_t nf = flux_.size();
  auto& p = field.values;
  for (std::size_t i = 0; i < nf; ++i) flux_[i] = bp_[i] * p[i] - bm_[i] * p[(i + 1) % n];
  bool negative = false;
  for (std::size_t i = 0; i < n; ++i) {
    double div = 0.0;
    if (axis_.periodic || i + 1 < n) div += flux_[i % nf];
    if (axis_.periodic || i > 0) div -= flux_[(i + nf - 1) % nf];
    p[i] -= dt * div;
    negative = negative || p[i] < 0.0;
  }
  if (negative) throw NegativeDensityError("negative density after 1D step; CFL logic failed");
  field.time += dt;
}

void marginal_step(Density1D& field, const fields::ModelProblem& model, double dt, MarginalKind kind) {
  FokkerPlanck1D solver(model, field.axis, kind);
  solver.step(field, dt);
}

Density1D extract_marginal(const DensityField& field) {
  const auto& g = field.grid;
  Density1D m;
  m.axis = g.x;
  m.time = field.time;
  m.values.assign(g.x.n, 0.0);
  for (std::size_t i = 0; i < g.x.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.y.n; ++j) s += field.at(i, j);
    m.values[i] = s * g.y.width();
  }
  return m;
}

DensityField product_initial(const Grid2D& grid, double amplitude, double y_mean, double y_sd) {
  DensityField f;
  f.grid = grid;
  f.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.x.n; ++i) {
    const double px = 1.0 + amplitude * std::cos(2.0 * std::numbers::pi * grid.x.center(i));
    for (std::size_t j = 0; j < grid.y.n; ++j) {
      const double u = (grid.y.center(j) - y_mean) / y_sd;
      f.at(i, j) = px * std::exp(-0.5 * u * u);
    }
  }
  const double m = f.mass();
  for (auto& v : f.values) v /= m;
  return f;
}

void write_field_csv(const std::string& path, const DensityField& field, const std::string& variant) {
  const auto& g = field.grid;
  {
    csv::Writer w(path, {"i", "j", "x_center", "y_center", "value"});
    for (std::size_t i = 0; i < g.x.n; ++i) {
      for (std::size_t j = 0; j < g.y.n; ++j) {
        w.cell(static_cast<std::uint64_t>(i)).cell(static_cast<std::uint64_t>(j));
        w.cell(g.x.center(i)).cell(g.y.center(j)).cell(field.at(i, j));
        w.end_row();
      }
    }
  }
  nlohmann::json meta = {{"n_x", g.x.n},   {"n_y", g.y.n},         {"x_lo", g.x.lo},  {"x_hi", g.x.hi},
                         {"y_lo", g.y.lo}, {"y_hi", g.y.hi},       {"torus", g.x.periodic},
                         {"time", field.time}, {"variant", variant}};
  std::ofstream out(path + ".json", std::ios::binary);
  if (!out) throw Error("cannot open " + path + ".json for writing");
  out << meta.dump(2) << '\n';
}

std::string to_string(Variant v) { return variant_name(v); }

}  // namespace abflab::pde
