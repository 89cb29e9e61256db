#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "abflab/fields.hpp"
#include "abflab/parallel.hpp"
#include "abflab/particles.hpp"
#include "abflab/types.hpp"

namespace abflab::pde {

enum class Variant { abf_metric, abf_plain, frozen_bias };

std::string to_string(Variant v);

/// Exponentially fitted flux weight B(s) = s / (e^s - 1).
double bernoulli(double s);

/// Explicit conservative finite volumes for
///   d_t psi = div(grad(V - A_t(x) + W(x)) psi + grad psi)   (beta = 1, xi = x)
/// with Scharfetter-Gummel face fluxes. Periodic in x on the torus, zero flux
/// at the y ends and at interval walls.
class FokkerPlanck2D {
 public:
  FokkerPlanck2D(const fields::ModelProblem& model, const Grid2D& grid, Variant variant, WorkerPool* pool = nullptr);

  const Grid2D& grid() const { return grid_; }
  Variant variant() const { return variant_; }

  /// Current A'_t per x column.
  const std::vector<double>& bias() const { return aprime_; }
  /// Sets the bias used by frozen_bias (and the hold value for empty columns).
  void set_bias(std::vector<double> aprime);
  /// frozen_bias only: A(x_{i+1}) - A(x_i) given per x face instead of integrated from A'.
  void set_bias_jumps(std::vector<double> aprime, std::vector<double> jumps);

  /// Column estimate sum_j F psi / sum_j psi; columns below the mass floor keep their value.
  /// Returns the number of such columns.
  std::size_t estimate_bias(const DensityField& field);

  /// min(hx, hy)^2 / (4 + 2 d min(hx, hy)) with d = max |dU/dx| + |dU/dy| over cell centres.
  double admissible_dt() const;
  /// Bound valid for every bias that is a column average of F (all abf steps).
  double worst_case_dt() const;

  /// One step. abf variants re-estimate the bias from `field` first.
  void step(DensityField& field, double dt);

  double mass_floor = 1e-30;

 private:
  double drift_bound(const std::vector<double>& aprime) const;

  fields::ModelProblem model_;
  Grid2D grid_;
  Variant variant_;
  WorkerPool* pool_;
  std::size_t nxf_;                 // number of x faces
  std::vector<double> F_;           // dV/dx at centres
  std::vector<double> abs_dy_;      // |dV/dy| at centres
  std::vector<double> w1_;          // W' at centres
  std::vector<double> dw_;          // W(x_{i+1}) - W(x_i) per x face
  std::vector<double> dv_x_;        // V(i+1, j) - V(i, j) per x face
  std::vector<double> edv_x_;       // exp of dv_x_
  std::vector<double> by_plus_;     // B(s) / hy^2 per y face
  std::vector<double> by_minus_;    // B(-s) / hy^2 per y face
  std::vector<double> aprime_;
  std::vector<double> jumps_;
  std::vector<double> fx_;
  std::vector<double> fy_;
};

/// One-shot step: builds a solver and takes a single step. For abf variants the
/// estimated bias is written back into `profile` (whose bins must match the x cells);
/// frozen_bias reads it at cell centres.
void fp2d_step(DensityField& field, const fields::ModelProblem& model, particles::BiasProfile& profile, double dt,
               Variant variant, WorkerPool* pool = nullptr);

enum class MarginalKind { heat_torus, drift_line };

/// d_t p = d_z(W' p + d_z p) (W = 0 on the torus), same flux family as the 2D solver.
class FokkerPlanck1D {
 public:
  FokkerPlanck1D(const fields::ModelProblem& model, const Axis& axis, MarginalKind kind);

  double admissible_dt() const;
  void step(Density1D& field, double dt);

 private:
  Axis axis_;
  MarginalKind kind_;
  double max_w1_ = 0.0;
  std::vector<double> bp_;  // B(s) / h^2 per face
  std::vector<double> bm_;  // B(-s) / h^2 per face
  std::vector<double> flux_;
};

void marginal_step(Density1D& field, const fields::ModelProblem& model, double dt, MarginalKind kind);

/// Column integrals sum_j psi_ij hy.
Density1D extract_marginal(const DensityField& field);

/// (1 + amplitude cos(2 pi x)) N(y_mean, y_sd^2) at cell centres, unit discrete mass.
DensityField product_initial(const Grid2D& grid, double amplitude, double y_mean, double y_sd);

/// CSV `i, j, x_center, y_center, value` plus `<path>.json` with grid, time and variant.
void write_field_csv(const std::string& path, const DensityField& field, const std::string& variant);

}  // namespace abflab::pde
