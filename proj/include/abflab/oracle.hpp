#pragma once

#include <cstddef>
#include <vector>

#include "abflab/fields.hpp"
#include "abflab/parallel.hpp"
#include "abflab/quadrature.hpp"
#include "abflab/types.hpp"

namespace abflab::oracle {

struct FreeEnergyProfile {
  std::vector<double> z;
  std::vector<double> A;       ///< pinned so that A[0] = 0
  std::vector<double> Aprime;
  std::vector<double> Z_sigma;
  std::vector<double> log_Z_sigma;

  /// Linear interpolation of A' (clamped at the ends).
  double Aprime_at(double z) const;
};

/// n equispaced points from lo to hi inclusive.
std::vector<double> profile_grid(const fields::ModelProblem& model, std::size_t n);

/// ln Z_sigma(z) and the slice mean of F at an arbitrary z. xi = x only.
quadrature::WeightedIntegral slice_integrals(const fields::ModelProblem& model, double z,
                                             const quadrature::TrapezoidOptions& options = {});

double log_partition(const fields::ModelProblem& model, double z, const quadrature::TrapezoidOptions& options = {});
double mean_force(const fields::ModelProblem& model, double z, const quadrature::TrapezoidOptions& options = {});

FreeEnergyProfile compute_free_energy(const fields::ModelProblem& model, const std::vector<double>& z_grid,
                                      const quadrature::TrapezoidOptions& options = {}, WorkerPool* pool = nullptr);

/// Max over the profile of |dA/dz - A'|, where dA/dz is a five-point centred
/// difference of -ln Z_sigma / beta with step h evaluated off-grid.
double mean_force_consistency(const fields::ModelProblem& model, const FreeEnergyProfile& profile, double h = 1e-3,
                              const quadrature::TrapezoidOptions& options = {});

struct EquilibriumDensities {
  DensityField psi_inf;
  Density1D psi_xi_inf;  ///< analytic e^{-beta W} / Z^xi at cell centres
  double Z = 0.0;
  double Z_xi = 0.0;

  /// Slice of psi_inf through column i, renormalized to a probability density in y.
  std::vector<double> conditional(std::size_t i) const;
};

/// Tabulates psi_inf at cell centres of `grid`. Slice weights come from fresh
/// quadrature at each centre; the table is renormalized to unit discrete mass.
EquilibriumDensities compute_equilibrium(const fields::ModelProblem& model, const Grid2D& grid,
                                         const quadrature::TrapezoidOptions& options = {},
                                         WorkerPool* pool = nullptr);

/// Column estimate of E(F | xi = z) from a tabulated density (midpoint rule in y).
/// Throws EmptySliceError when the column mass is below floor.
double conditional_expectation_of_F(const fields::ModelProblem& model, const DensityField& field, double z,
                                    double floor = 1e-30);

/// F at every cell centre, same layout as the field.
std::vector<double> local_mean_force_table(const fields::ModelProblem& model, const Grid2D& grid);

}  // namespace abflab::oracle
