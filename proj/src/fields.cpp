#include "abflab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "abflab/errors.hpp"

namespace abflab::fields {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string describe(Vec2 q) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << q.x << ", " << q.y << ")";
  return os.str();
}

bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

// Nested node sets: n + 1 equispaced nodes including both ends.
double node(double lo, double hi, std::size_t n, std::size_t i) {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
}

}  // namespace

Confinement harmonic_confinement(double alpha) {
  Confinement w;
  w.value = [alpha](double z) { return 0.5 * alpha * z * z; };
  w.d1 = [alpha](double z) { return alpha * z; };
  w.d2 = [alpha](double) { return alpha; };
  w.alpha = alpha;
  return w;
}

ModelProblem make_test_model(const TestFamily& family, const TestModelOptions& options) {
  const double c = family.c;
  const double a = family.a;
  const double k = family.k;
  if (!(k > 0.0)) throw ModelAssumptionError("test family requires k > 0");
  if (!(options.beta > 0.0)) throw ModelAssumptionError("beta must be positive");

  ModelProblem model;
  model.beta = options.beta;
  model.family = family;
  model.potential.value = [=](Vec2 q) {
    const double s = std::sin(kTwoPi * q.x);
    const double co = std::cos(kTwoPi * q.x);
    return c * co + a * q.y * s + 0.5 * k * q.y * q.y;
  };
  model.potential.gradient = [=](Vec2 q) {
    const double s = std::sin(kTwoPi * q.x);
    const double co = std::cos(kTwoPi * q.x);
    return Vec2{kTwoPi * (-c * s + a * q.y * co), a * s + k * q.y};
  };
  model.potential.hessian = [=](Vec2 q) {
    const double s = std::sin(kTwoPi * q.x);
    const double co = std::cos(kTwoPi * q.x);
    const double dxx = -kTwoPi * kTwoPi * (c * co + a * q.y * s);
    const double dxy = kTwoPi * a * co;
    return Mat2{{{{dxx, dxy}, {dxy, k}}}};
  };
  model.split = SplitForm{[=](Vec2 q) { return c * std::cos(kTwoPi * q.x); }, [=](Vec2) { return k; }};

  const double L = options.y_half_width > 0.0 ? options.y_half_width : 8.0 / std::sqrt(options.beta * k);
  model.y_domain.lo = -L;
  model.y_domain.hi = L;
  model.y_domain.truncation_note =
      "R truncated to [-L, L]; the conditional Gaussian of width 1/sqrt(beta k) puts < 1e-12 mass outside "
      "when L >= 8/sqrt(beta k)";

  if (options.interval) {
    if (!(options.x_hi > options.x_lo)) throw ModelAssumptionError("interval requires x_lo < x_hi");
    model.x_domain = XDomain{false, options.x_lo, options.x_hi};
    model.confinement = harmonic_confinement(options.alpha);
  }
  validate(model);
  return model;
}

void validate(const ModelProblem& model) {
  if (!(model.beta > 0.0)) throw ModelAssumptionError("beta must be positive");
  if (!model.potential.value || !model.potential.gradient || !model.potential.hessian)
    throw ModelAssumptionError("potential needs value, gradient and hessian");
  if (model.xi.kind == XiKind::custom &&
      (!model.xi.custom.value || !model.xi.custom.gradient || !model.xi.custom.hessian))
    throw ModelAssumptionError("custom reaction coordinate needs value, gradient and hessian");
  if (model.x_domain.torus && model.confinement)
    throw ModelAssumptionError("W must vanish when the reaction coordinate lives on the torus");
  if (!(model.x_domain.hi > model.x_domain.lo) || !(model.y_domain.hi > model.y_domain.lo))
    throw ModelAssumptionError("empty domain");
  if (model.confinement && (!model.confinement->value || !model.confinement->d1 || !model.confinement->d2))
    throw ModelAssumptionError("confinement needs W, W' and W''");
}

ModelProblem to_unit_temperature(const ModelProblem& model) {
  const double b = model.beta;
  ModelProblem out = model;
  out.beta = 1.0;
  if (b == 1.0) return out;

  const ScalarField2D v = model.potential;
  out.potential.value = [v, b](Vec2 q) { return b * v.value(q); };
  out.potential.gradient = [v, b](Vec2 q) { return b * v.gradient(q); };
  out.potential.hessian = [v, b](Vec2 q) { return b * v.hessian(q); };
  if (model.confinement) {
    const Confinement w = *model.confinement;
    out.confinement = Confinement{[w, b](double z) { return b * w.value(z); },
                                  [w, b](double z) { return b * w.d1(z); },
                                  [w, b](double z) { return b * w.d2(z); }, b * w.alpha};
  }
  if (model.split) {
    const SplitForm s = *model.split;
    out.split = SplitForm{[s, b](Vec2 q) { return b * s.v1(q); }, [s, b](Vec2 q) { return b * s.d2y_v0(q); }};
  }
  if (model.family) out.family = TestFamily{b * model.family->c, b * model.family->a, b * model.family->k};
  return out;
}

double local_mean_force(const ModelProblem& model, Vec2 point) {
  const Vec2 gv = model.potential.gradient(point);
  if (!finite(gv)) throw EvaluationError("non-finite potential gradient at " + describe(point));
  if (model.xi.kind == XiKind::linear_x) return gv.x;

  const Vec2 g = model.xi.gradient(point);
  const double g2 = norm_sq(g);
  if (!(std::sqrt(g2) >= model.gradient_floor))
    throw DegenerateGradientError("|grad xi| below floor at " + describe(point));
  const Mat2 h = model.xi.hessian(point);
  // div(g / |g|^2) = lap(xi) / |g|^2 - 2 g.H g / |g|^4
  const double div = h.trace() / g2 - 2.0 * dot(g, h.apply(g)) / (g2 * g2);
  const double f = dot(gv, g) / g2 - div / model.beta;
  if (!std::isfinite(f)) throw EvaluationError("non-finite local mean force at " + describe(point));
  return f;
}

Projections projections(const ModelProblem& model, Vec2 point) {
  const Vec2 g = model.xi.gradient(point);
  const double n = norm(g);
  if (!(n >= model.gradient_floor)) throw DegenerateGradientError("|grad xi| below floor at " + describe(point));
  const Mat2 q = (1.0 / (n * n)) * outer(g, g);
  return {Mat2::identity() - q, q};
}

double overall_rate(double beta, double rho, double m, double r) { return std::min(rho / (m * m), r) / beta; }

ConvergenceConstants convergence_constants(const ModelProblem& model, const EvaluationGrid& grid) {
  if (!model.split) throw ModelAssumptionError("convergence constants need the split form V = V0 + V1");
  const std::size_t nx = std::max<std::size_t>(grid.nx, 1);
  const std::size_t ny = std::max<std::size_t>(grid.ny, 1);

  double m = 0.0;
  double M = 0.0;
  double min_d2y = std::numeric_limits<double>::infinity();
  double v1_max = -std::numeric_limits<double>::infinity();
  double v1_min = std::numeric_limits<double>::infinity();

  const double fd = 1e-5;
  for (std::size_t i = 0; i <= nx; ++i) {
    const double x = node(model.x_domain.lo, model.x_domain.hi, nx, i);
    for (std::size_t j = 0; j <= ny; ++j) {
      const Vec2 q{x, node(model.y_domain.lo, model.y_domain.hi, ny, j)};
      m = std::max(m, norm(model.xi.gradient(q)));
      if (model.xi.kind == XiKind::linear_x) {
        M = std::max(M, std::abs(model.potential.hessian(q)(0, 1)));
      } else {
        const Vec2 gradF{(local_mean_force(model, {q.x + fd, q.y}) - local_mean_force(model, {q.x - fd, q.y})) / (2 * fd),
                         (local_mean_force(model, {q.x, q.y + fd}) - local_mean_force(model, {q.x, q.y - fd})) / (2 * fd)};
        M = std::max(M, norm(projections(model, q).P.apply(gradF)));
      }
      min_d2y = std::min(min_d2y, model.split->d2y_v0(q));
      const double v1 = model.split->v1(q);
      v1_max = std::max(v1_max, v1);
      v1_min = std::min(v1_min, v1);
    }
  }
  if (!(min_d2y > 0.0)) {
    std::ostringstream os;
    os << "inf d2V0/dy2 = " << min_d2y << " <= 0: conditional measures are not uniformly log-concave";
    throw ModelAssumptionError(os.str());
  }

  ConvergenceConstants out;
  out.m = m;
  out.M_const = M;
  out.rho = model.beta * min_d2y * std::exp(-model.beta * (v1_max - v1_min));
  if (model.x_domain.torus) {
    out.r = 4.0 * std::numbers::pi * std::numbers::pi;
  } else {
    if (!model.confinement || !(model.confinement->alpha > 0.0))
      throw ModelAssumptionError("line case needs an alpha-convex confinement with alpha > 0");
    out.r = model.confinement->alpha;
  }
  out.lambda = overall_rate(model.beta, out.rho, out.m, out.r);
  return out;
}

}  // namespace abflab::fields
