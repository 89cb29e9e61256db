#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "abflab/fields.hpp"
#include "abflab/parallel.hpp"
#include "abflab/types.hpp"

namespace abflab::particles {

struct ParticleEnsemble {
  std::vector<Vec2> positions;
  std::uint64_t seed = 0;
  double time = 0.0;
  std::uint64_t step_count = 0;
  std::vector<std::string> warnings;
};

/// Piecewise estimate of A'_t on bins over the reaction-coordinate range.
struct BiasProfile {
  Axis bins;
  std::vector<double> force;
  std::vector<std::size_t> occupancy;
  double tau = 0.0;
  bool interpolate = false;
  /// Empty bins seen at the last update.
  std::size_t empty_bins = 0;

  /// A'_t(z): bin value, or linear between bin centres when interpolate is set.
  double lookup(double z) const;
  /// A_t(z) = int_lo^z A'_t, with lo the start of the range.
  double integrated(double z) const;
};

BiasProfile make_bias_profile(const fields::ModelProblem& model, std::size_t n_bins, double tau = 0.0,
                              bool interpolate = false);

enum class InitKind { uniform, gibbs, equilibrium, point };

struct InitOptions {
  InitKind kind = InitKind::uniform;
  Vec2 point{0.5, 0.0};
  /// y range half-width for uniform init; 0 selects 1/sqrt(beta k) (or 1 without a test family).
  double y_half_width = 0.0;
};

ParticleEnsemble init_ensemble(const fields::ModelProblem& model, std::size_t n_particles, const InitOptions& init,
                               std::uint64_t seed);

/// xi(q) mapped into the bin range (wrapped on the torus).
double coordinate(const fields::ModelProblem& model, Vec2 q);

/// Per-bin sample mean of F over member particles (unit weights), then replace
/// (tau = 0) or relax by dt/tau. Empty bins keep their value. `forces` may
/// supply precomputed F per particle.
void update_bias(const ParticleEnsemble& ensemble, const fields::ModelProblem& model, BiasProfile& profile, double dt,
                 WorkerPool* pool = nullptr, const std::vector<double>* forces = nullptr);

enum class Scheme { metric, plain };

/// Deterministic drift b(q) of the Euler-Maruyama update X += b dt + sigma sqrt(dt) G.
Vec2 drift(const fields::ModelProblem& model, const BiasProfile& profile, Vec2 q, Scheme scheme);
/// Scalar noise amplitude sigma(q).
double noise_scale(const fields::ModelProblem& model, Vec2 q, Scheme scheme);
/// Potential whose gradient generates the drift: b = -grad Phi (plain) or
/// b = -|grad xi|^-2 grad Phi (metric). Not periodic in xi across the torus seam.
double effective_potential(const fields::ModelProblem& model, const BiasProfile& profile, Vec2 q, Scheme scheme);

struct StepOptions {
  bool zero_noise = false;
  /// When set, receives the standard normal pair used by each particle.
  std::vector<Vec2>* noise_out = nullptr;
  /// Precomputed grad V at the current positions; evaluated on the fly when null.
  const std::vector<Vec2>* potential_gradients = nullptr;
  WorkerPool* pool = nullptr;
};

void step(ParticleEnsemble& ensemble, const fields::ModelProblem& model, const BiasProfile& profile, double dt,
          Scheme scheme, const StepOptions& options = {});

/// A'_t(xi_prev) - W'(xi_prev) - (dxi - sqrt(2/beta) (grad xi/|grad xi|)(x_prev) . dB) / dt with dB = sqrt(dt) G.
double ito_force_estimate(Vec2 x_prev, Vec2 x_next, const fields::ModelProblem& model, const BiasProfile& profile,
                          double dt, Vec2 noise_used);

/// Normalized histogram of xi over the axis cells.
Density1D empirical_marginal(const ParticleEnsemble& ensemble, const Axis& bins, const fields::ModelProblem& model);

/// Per-bin mean and standard error of F over the current ensemble.
struct BinStatistics {
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::vector<std::size_t> count;
};

BinStatistics bin_statistics(const ParticleEnsemble& ensemble, const fields::ModelProblem& model, const Axis& bins,
                             WorkerPool* pool = nullptr);

/// Paired per-bin accumulation of (Ito estimate, direct F at x_prev).
struct ItoAccumulator {
  std::vector<double> sum_ito, sum_f, sum_d, sum_d2;
  std::vector<std::size_t> count;

  explicit ItoAccumulator(std::size_t n_bins = 0);
  void add(std::size_t bin, double ito, double f);
  double mean_ito(std::size_t b) const;
  double mean_f(std::size_t b) const;
  /// Standard error of the per-bin mean difference.
  double stderr_diff(std::size_t b) const;
};

struct SimulationOptions {
  Scheme scheme = Scheme::metric;
  std::size_t n_bins = 32;
  double tau = 0.0;
  bool interpolate = false;
  bool track_ito = false;
  /// Accumulate Ito samples on every k-th step.
  std::size_t ito_stride = 1;
};

/// ABF loop: each advance() updates the bias from the current ensemble, then steps.
class AbfParticleSimulation {
 public:
  AbfParticleSimulation(const fields::ModelProblem& model, ParticleEnsemble ensemble, const SimulationOptions& options);

  void advance(double dt, WorkerPool* pool = nullptr);
  /// Refreshes the bias from the current positions without moving them.
  void refresh_bias(WorkerPool* pool = nullptr);

  const ParticleEnsemble& ensemble() const { return ensemble_; }
  const BiasProfile& profile() const { return profile_; }
  const ItoAccumulator& ito() const { return ito_; }
  const fields::ModelProblem& model() const { return model_; }

 private:
  void compute_forces(WorkerPool* pool);

  fields::ModelProblem model_;
  ParticleEnsemble ensemble_;
  SimulationOptions options_;
  BiasProfile profile_;
  ItoAccumulator ito_;
  std::vector<double> forces_;
  std::vector<Vec2> grads_;
  std::vector<Vec2> noise_;
  std::vector<Vec2> prev_;
};

/// CSV `particle_id, x, y`.
void write_snapshot_csv(const std::string& path, const ParticleEnsemble& ensemble);
/// CSV `bin_lo, bin_hi, force, occupancy`.
void write_bias_csv(const std::string& path, const BiasProfile& profile);

}  // namespace abflab::particles
