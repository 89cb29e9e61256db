#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "abflab/types.hpp"

namespace abflab::fields {

/// Scalar field on the plane with analytic first and second partials.
struct ScalarField2D {
  std::function<double(Vec2)> value;
  std::function<Vec2(Vec2)> gradient;
  std::function<Mat2(Vec2)> hessian;
};

enum class XiKind { linear_x, custom };

/// Reaction coordinate xi. For linear_x, xi(x, y) = x and the custom callables are unused.
struct ReactionCoordinate {
  XiKind kind = XiKind::linear_x;
  ScalarField2D custom;

  double value(Vec2 q) const { return kind == XiKind::linear_x ? q.x : custom.value(q); }
  Vec2 gradient(Vec2 q) const { return kind == XiKind::linear_x ? Vec2{1.0, 0.0} : custom.gradient(q); }
  Mat2 hessian(Vec2 q) const { return kind == XiKind::linear_x ? Mat2::zero() : custom.hessian(q); }
};

/// Confining potential W along the reaction coordinate. `alpha` is the declared
/// convexity modulus (W'' >= alpha), used as the macroscopic rate on the line.
struct Confinement {
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  double alpha = 0.0;
};

struct XDomain {
  bool torus = true;
  double lo = 0.0;
  double hi = 1.0;
};

struct YDomain {
  double lo = -4.0;
  double hi = 4.0;
  std::string truncation_note;
};

/// Declared split V = V0 + V1 with V1 bounded; needed for the LSI constant estimate.
struct SplitForm {
  std::function<double(Vec2)> v1;
  std::function<double(Vec2)> d2y_v0;
};

/// Parameters of V(x, y) = c cos(2 pi x) + a y sin(2 pi x) + (k/2) y^2.
struct TestFamily {
  double c = 1.0;
  double a = 0.5;
  double k = 4.0;
};

struct ModelProblem {
  double beta = 1.0;
  ScalarField2D potential;
  ReactionCoordinate xi;
  std::optional<Confinement> confinement;
  XDomain x_domain;
  YDomain y_domain;
  std::optional<SplitForm> split;
  std::optional<TestFamily> family;
  double gradient_floor = 1e-12;

  double W(double z) const { return confinement ? confinement->value(z) : 0.0; }
  double W1(double z) const { return confinement ? confinement->d1(z) : 0.0; }
  double W2(double z) const { return confinement ? confinement->d2(z) : 0.0; }

  /// Axis for the reaction-coordinate range with n cells.
  Axis z_axis(std::size_t n) const { return Axis{x_domain.lo, x_domain.hi, n, x_domain.torus}; }
  Axis y_axis(std::size_t n) const { return Axis{y_domain.lo, y_domain.hi, n, false}; }
  Grid2D grid(std::size_t nx, std::size_t ny) const { return Grid2D{z_axis(nx), y_axis(ny)}; }
};

struct TestModelOptions {
  double beta = 1.0;
  /// Half-width L of the truncated y range; 0 selects 8 / sqrt(beta k).
  double y_half_width = 0.0;
  /// Interval instead of torus for x; W(z) = (alpha/2) z^2 is then attached.
  bool interval = false;
  double x_lo = -1.0;
  double x_hi = 1.0;
  double alpha = 1.0;
};

/// Builds the parametric test model on T x [-L, L] (or [x_lo, x_hi] x [-L, L]).
ModelProblem make_test_model(const TestFamily& family, const TestModelOptions& options = {});

/// Harmonic confinement W(z) = (alpha/2) z^2.
Confinement harmonic_confinement(double alpha);

/// Throws ModelAssumptionError on beta <= 0, W attached on the torus, or missing callables.
void validate(const ModelProblem& model);

/// The same physics at beta = 1: V -> beta V, W -> beta W. Time maps as t_unit = t / beta.
ModelProblem to_unit_temperature(const ModelProblem& model);

/// Local mean force F = grad V . grad xi / |grad xi|^2 - beta^-1 div(grad xi / |grad xi|^2).
double local_mean_force(const ModelProblem& model, Vec2 point);

struct Projections {
  Mat2 P;  ///< onto the tangent space of the level set
  Mat2 Q;  ///< onto its normal
};

Projections projections(const ModelProblem& model, Vec2 point);

/// Sup/inf estimation grid: nested under doubling (n+1 nodes per axis, endpoints included).
struct EvaluationGrid {
  std::size_t nx = 256;
  std::size_t ny = 256;
};

struct ConvergenceConstants {
  double m = 0.0;        ///< sup |grad xi|
  double M_const = 0.0;  ///< sup |grad_Sigma F|
  double rho = 0.0;      ///< uniform LSI constant of the conditional measures
  double r = 0.0;        ///< macroscopic rate
  double lambda = 0.0;   ///< beta^-1 min(rho / m^2, r)
};

ConvergenceConstants convergence_constants(const ModelProblem& model, const EvaluationGrid& grid = {});

/// lambda = beta^-1 min(rho m^-2, r).
double overall_rate(double beta, double rho, double m, double r);

}  // namespace abflab::fields
