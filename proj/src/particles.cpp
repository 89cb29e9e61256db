#include "abflab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "abflab/csv.hpp"
#include "abflab/errors.hpp"
#include "abflab/rng.hpp"

namespace abflab::particles {

namespace {

double wrap_or_clamp(const Axis& a, double v) {
  if (a.periodic) return a.wrap(v);
  return std::clamp(v, a.lo, a.hi);
}

double reflect(double v, double lo, double hi) {
  if (v > hi) v = 2.0 * hi - v;
  if (v < lo) v = 2.0 * lo - v;
  return std::clamp(v, lo, hi);
}

/// Inverse CDF of a piecewise-constant density with weights w on cells of `a`.
struct CellSampler {
  Axis axis;
  std::vector<double> cdf;  // size n + 1

  CellSampler(const Axis& a, const std::vector<double>& w) : axis(a), cdf(w.size() + 1, 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) cdf[i + 1] = cdf[i] + w[i];
    for (auto& c : cdf) c /= cdf.back();
  }

  std::size_t cell(double u) const {
    const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()) - 1, axis.n - 1);
  }

  /// Position inside the chosen cell by linear interpolation of the CDF.
  double sample(double u) const {
    const std::size_t i = cell(u);
    const double span = cdf[i + 1] - cdf[i];
    const double t = span > 0.0 ? std::clamp((u - cdf[i]) / span, 0.0, 1.0) : 0.5;
    return axis.edge(i) + t * axis.width();
  }
};

}  // namespace

double BiasProfile::lookup(double z) const {
  if (!interpolate) return force[bins.locate(z)];
  const double u = (bins.wrap(z) - bins.lo) / bins.width() - 0.5;
  const double fl = std::floor(u);
  const double t = u - fl;
  const auto n = static_cast<long>(bins.n);
  long i0 = static_cast<long>(fl);
  long i1 = i0 + 1;
  if (bins.periodic) {
    // u lies in [-0.5, n - 0.5) after wrapping
    if (i0 < 0) i0 += n;
    if (i1 >= n) i1 -= n;
  } else {
    if (i0 < 0) return force.front();
    if (i1 >= n) return force.back();
  }
  return (1.0 - t) * force[static_cast<std::size_t>(i0)] + t * force[static_cast<std::size_t>(i1)];
}

double BiasProfile::integrated(double z) const {
  double shift = 0.0;
  if (bins.periodic) {
    double total = 0.0;
    for (double f : force) total += f * bins.width();
    const double periods = std::floor((z - bins.lo) / bins.length());
    shift = periods * total;
    z -= periods * bins.length();
  }
  z = std::clamp(z, bins.lo, bins.hi);
  if (!interpolate) {
    const std::size_t k = bins.locate(z);
    double s = 0.0;
    for (std::size_t b = 0; b < k; ++b) s += force[b] * bins.width();
    return shift + s + force[k] * (z - bins.edge(k));
  }
  // The interpolant is linear between consecutive centres; trapezoid is exact there.
  double s = 0.0;
  double a = bins.lo;
  double fa = lookup(a);
  for (std::size_t b = 0; b < bins.n && a < z; ++b) {
    const double c = std::min(bins.center(b), z);
    if (c > a) {
      const double fc = lookup(c);
      s += 0.5 * (fa + fc) * (c - a);
      a = c;
      fa = fc;
    }
  }
  if (z > a) s += 0.5 * (fa + lookup(z)) * (z - a);
  return shift + s;
}

BiasProfile make_bias_profile(const fields::ModelProblem& model, std::size_t n_bins, double tau, bool interpolate) {
  if (n_bins == 0) throw ConfigError("n_bins must be positive");
  BiasProfile p;
  p.bins = model.z_axis(n_bins);
  p.force.assign(n_bins, 0.0);
  p.occupancy.assign(n_bins, 0);
  p.tau = tau;
  p.interpolate = interpolate;
  p.empty_bins = n_bins;
  return p;
}

double coordinate(const fields::ModelProblem& model, Vec2 q) {
  const double z = model.xi.kind == fields::XiKind::linear_x ? q.x : model.xi.value(q);
  if (!model.x_domain.torus || (z >= model.x_domain.lo && z < model.x_domain.hi)) return z;
  return model.z_axis(1).wrap(z);
}

ParticleEnsemble init_ensemble(const fields::ModelProblem& model, std::size_t n_particles, const InitOptions& init,
                               std::uint64_t seed) {
  if (n_particles == 0) throw ConfigError("n_particles must be at least 1");
  ParticleEnsemble e;
  e.seed = seed;
  e.positions.resize(n_particles);
  const Axis xa = model.z_axis(1);
  const double ylo = model.y_domain.lo;
  const double yhi = model.y_domain.hi;

  auto uniforms = [&](std::size_t p, std::uint64_t block) {
    const auto r = rng::draw(seed, p, block, rng::Stream::init);
    return std::pair{rng::open_unit(r[0], r[1]), rng::open_unit(r[2], r[3])};
  };

  switch (init.kind) {
    case InitKind::point: {
      for (auto& q : e.positions) q = init.point;
      e.warnings.push_back("point init: all mass in one bin; empty-bin fallback will engage");
      break;
    }
    case InitKind::uniform: {
      double h = init.y_half_width;
      if (!(h > 0.0)) h = model.family ? 1.0 / std::sqrt(model.beta * model.family->k) : 1.0;
      const double lo = std::max(ylo, -h);
      const double hi = std::min(yhi, h);
      for (std::size_t p = 0; p < n_particles; ++p) {
        const auto [u0, u1] = uniforms(p, 0);
        e.positions[p] = {wrap_or_clamp(xa, xa.lo + u0 * xa.length()), lo + u1 * (hi - lo)};
      }
      break;
    }
    case InitKind::gibbs:
    case InitKind::equilibrium: {
      if (model.xi.kind != fields::XiKind::linear_x)
        throw ModelAssumptionError("gibbs/equilibrium init needs xi(x, y) = x");
      const std::size_t nx = 1024;
      const std::size_t ny = 1024;
      const Grid2D g = model.grid(nx, ny);
      std::vector<double> wx(nx);
      std::vector<CellSampler> slices;
      slices.reserve(nx);
      const double beta = model.beta;
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = g.x.center(i);
        std::vector<double> u(ny);
        double umin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ny; ++j) umin = std::min(umin, u[j] = beta * model.potential.value({x, g.y.center(j)}));
        std::vector<double> wy(ny);
        double s = 0.0;
        for (std::size_t j = 0; j < ny; ++j) s += wy[j] = std::exp(umin - u[j]);
        slices.emplace_back(g.y, wy);
        // log of the slice weight int e^{-beta V} dy, midpoint rule
        const double log_zs = std::log(s * g.y.width()) - umin;
        wx[i] = init.kind == InitKind::gibbs ? log_zs - beta * model.W(x) : -beta * model.W(x);
      }
      const double wmax = *std::max_element(wx.begin(), wx.end());
      for (auto& w : wx) w = std::exp(w - wmax);
      const CellSampler xs(g.x, wx);
      for (std::size_t p = 0; p < n_particles; ++p) {
        const auto [u0, u1] = uniforms(p, 0);
        const auto [u2, u3] = uniforms(p, 1);
        (void)u3;
        const std::size_t i = xs.cell(u0);
        const double x = g.x.edge(i) + u1 * g.x.width();
        e.positions[p] = {wrap_or_clamp(xa, x), reflect(slices[i].sample(u2), ylo, yhi)};
      }
      break;
    }
  }
  return e;
}

void update_bias(const ParticleEnsemble& ensemble, const fields::ModelProblem& model, BiasProfile& profile, double dt,
                 WorkerPool* pool, const std::vector<double>* forces) {
  const std::size_t n = ensemble.positions.size();
  std::vector<double> local;
  if (forces == nullptr) {
    local.resize(n);
    parallel_for(pool, n, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) local[p] = fields::local_mean_force(model, ensemble.positions[p]);
    });
    forces = &local;
  }

  const std::size_t nb = profile.bins.n;
  std::vector<double> sum(nb, 0.0);
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const double f = (*forces)[p];
    if (!std::isfinite(f)) {
      std::ostringstream os;
      os << "non-finite local mean force for particle " << p;
      throw NonFiniteError(os.str(), ensemble.step_count, p);
    }
    const std::size_t b = profile.bins.locate(coordinate(model, ensemble.positions[p]));
    sum[b] += f;
    ++count[b];
  }

  profile.empty_bins = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    profile.occupancy[b] = count[b];
    if (count[b] == 0) {
      ++profile.empty_bins;
      continue;
    }
    const double mean = sum[b] / static_cast<double>(count[b]);
    if (profile.tau > 0.0)
      profile.force[b] += (dt / profile.tau) * (mean - profile.force[b]);
    else
      profile.force[b] = mean;
  }
}

namespace {

Vec2 drift_given(const fields::ModelProblem& model, const BiasProfile& profile, Vec2 q, Vec2 gv, Scheme scheme) {
  const double z = coordinate(model, q);
  const double bias = profile.lookup(z) - model.W1(z);
  if (model.xi.kind == fields::XiKind::linear_x) return {-(gv.x - bias), -gv.y};

  const Vec2 g = model.xi.gradient(q);
  if (scheme == Scheme::plain) return -1.0 * (gv - bias * g);
  const double g2 = norm_sq(g);
  if (!(std::sqrt(g2) >= model.gradient_floor)) throw DegenerateGradientError("|grad xi| below floor");
  const Vec2 hg = model.xi.hessian(q).apply(g);
  return (-1.0 / g2) * (gv - bias * g + (2.0 / (model.beta * g2)) * hg);
}

}  // namespace

Vec2 drift(const fields::ModelProblem& model, const BiasProfile& profile, Vec2 q, Scheme scheme) {
  return drift_given(model, profile, q, model.potential.gradient(q), scheme);
}

double noise_scale(const fields::ModelProblem& model, Vec2 q, Scheme scheme) {
  const double s = std::sqrt(2.0 / model.beta);
  if (scheme == Scheme::plain || model.xi.kind == fields::XiKind::linear_x) return s;
  return s / norm(model.xi.gradient(q));
}

double effective_potential(const fields::ModelProblem& model, const BiasProfile& profile, Vec2 q, Scheme scheme) {
  const double z = model.xi.value(q);
  double phi = model.potential.value(q) - profile.integrated(z) + model.W(z);
  if (scheme == Scheme::metric && model.xi.kind == fields::XiKind::custom)
    phi += std::log(norm_sq(model.xi.gradient(q))) / model.beta;
  return phi;
}

void step(ParticleEnsemble& ensemble, const fields::ModelProblem& model, const BiasProfile& profile, double dt,
          Scheme scheme, const StepOptions& options) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const std::size_t n = ensemble.positions.size();
  if (options.noise_out) options.noise_out->resize(n);
  const Axis xa = model.z_axis(1);
  const double ylo = model.y_domain.lo;
  const double yhi = model.y_domain.hi;
  const double sdt = std::sqrt(dt);
  const std::uint64_t k = ensemble.step_count;

  // Failures are recorded per particle and raised after the loop, lowest index first.
  std::vector<std::size_t> bad;
  std::mutex bad_mutex;
  parallel_for(options.pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      Vec2& q = ensemble.positions[p];
      Vec2 g{};
      if (!options.zero_noise) {
        const auto gg = rng::box_muller(rng::draw(ensemble.seed, p, k, rng::Stream::dynamics));
        g = {gg.g0, gg.g1};
      }
      if (options.noise_out) (*options.noise_out)[p] = g;
      const Vec2 gv = options.potential_gradients ? (*options.potential_gradients)[p] : model.potential.gradient(q);
      const Vec2 d = drift_given(model, profile, q, gv, scheme);
      const double s = noise_scale(model, q, scheme) * sdt;
      Vec2 next{q.x + d.x * dt + s * g.x, q.y + d.y * dt + s * g.y};
      if (!std::isfinite(next.x) || !std::isfinite(next.y)) {
        std::lock_guard lock(bad_mutex);
        bad.push_back(p);
        continue;
      }
      q = {wrap_or_clamp(xa, next.x), reflect(next.y, ylo, yhi)};
    }
  });
  if (!bad.empty()) {
    const std::size_t p = *std::min_element(bad.begin(), bad.end());
    std::ostringstream os;
    os << "particle " << p << " left the finite range at step " << k;
    throw NonFiniteError(os.str(), k, p);
  }
  ensemble.time += dt;
  ++ensemble.step_count;
}

double ito_force_estimate(Vec2 x_prev, Vec2 x_next, const fields::ModelProblem& model, const BiasProfile& profile,
                          double dt, Vec2 noise_used) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  double dxi = model.xi.value(x_next) - model.xi.value(x_prev);
  if (model.x_domain.torus) {
    const double L = model.x_domain.hi - model.x_domain.lo;
    dxi -= L * std::round(dxi / L);
  }
  const Vec2 g = model.xi.gradient(x_prev);
  const Vec2 unit = (1.0 / norm(g)) * g;
  const double noise = std::sqrt(2.0 / model.beta) * std::sqrt(dt) * dot(unit, noise_used);
  const double z = coordinate(model, x_prev);
  return profile.lookup(z) - model.W1(z) - (dxi - noise) / dt;
}

Density1D empirical_marginal(const ParticleEnsemble& ensemble, const Axis& bins, const fields::ModelProblem& model) {
  Density1D h;
  h.axis = bins;
  h.time = ensemble.time;
  h.values.assign(bins.n, 0.0);
  for (const auto& q : ensemble.positions) h.values[bins.locate(coordinate(model, q))] += 1.0;
  const double scale = 1.0 / (static_cast<double>(ensemble.positions.size()) * bins.width());
  for (auto& v : h.values) v *= scale;
  return h;
}

BinStatistics bin_statistics(const ParticleEnsemble& ensemble, const fields::ModelProblem& model, const Axis& bins,
                             WorkerPool* pool) {
  const std::size_t n = ensemble.positions.size();
  std::vector<double> f(n);
  parallel_for(pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) f[p] = fields::local_mean_force(model, ensemble.positions[p]);
  });
  BinStatistics s;
  s.mean.assign(bins.n, 0.0);
  s.stderr_.assign(bins.n, std::nan(""));
  s.count.assign(bins.n, 0);
  std::vector<double> sum2(bins.n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t b = bins.locate(coordinate(model, ensemble.positions[p]));
    s.mean[b] += f[p];
    sum2[b] += f[p] * f[p];
    ++s.count[b];
  }
  for (std::size_t b = 0; b < bins.n; ++b) {
    const auto c = static_cast<double>(s.count[b]);
    if (s.count[b] == 0) continue;
    s.mean[b] /= c;
    if (s.count[b] > 1) {
      const double var = std::max(0.0, (sum2[b] - c * s.mean[b] * s.mean[b]) / (c - 1.0));
      s.stderr_[b] = std::sqrt(var / c);
    }
  }
  return s;
}

ItoAccumulator::ItoAccumulator(std::size_t n_bins)
    : sum_ito(n_bins, 0.0), sum_f(n_bins, 0.0), sum_d(n_bins, 0.0), sum_d2(n_bins, 0.0), count(n_bins, 0) {}

void ItoAccumulator::add(std::size_t bin, double ito, double f) {
  const double d = ito - f;
  sum_ito[bin] += ito;
  sum_f[bin] += f;
  sum_d[bin] += d;
  sum_d2[bin] += d * d;
  ++count[bin];
}

double ItoAccumulator::mean_ito(std::size_t b) const {
  return count[b] ? sum_ito[b] / static_cast<double>(count[b]) : std::nan("");
}

double ItoAccumulator::mean_f(std::size_t b) const {
  return count[b] ? sum_f[b] / static_cast<double>(count[b]) : std::nan("");
}

double ItoAccumulator::stderr_diff(std::size_t b) const {
  if (count[b] < 2) return std::nan("");
  const auto c = static_cast<double>(count[b]);
  const double m = sum_d[b] / c;
  const double var = std::max(0.0, (sum_d2[b] - c * m * m) / (c - 1.0));
  return std::sqrt(var / c);
}

AbfParticleSimulation::AbfParticleSimulation(const fields::ModelProblem& model, ParticleEnsemble ensemble,
                                             const SimulationOptions& options)
    : model_(model),
      ensemble_(std::move(ensemble)),
      options_(options),
      profile_(make_bias_profile(model, options.n_bins, options.tau, options.interpolate)),
      ito_(options.n_bins) {}

void AbfParticleSimulation::compute_forces(WorkerPool* pool) {
  const std::size_t n = ensemble_.positions.size();
  forces_.resize(n);
  grads_.resize(n);
  const bool linear = model_.xi.kind == fields::XiKind::linear_x;
  parallel_for(pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Vec2 q = ensemble_.positions[p];
      grads_[p] = model_.potential.gradient(q);
      // for xi = x the mean force is dV/dx; reuse the gradient instead of evaluating it twice
      forces_[p] = linear && std::isfinite(grads_[p].x) && std::isfinite(grads_[p].y)
                       ? grads_[p].x
                       : fields::local_mean_force(model_, q);
    }
  });
}

void AbfParticleSimulation::refresh_bias(WorkerPool* pool) {
  compute_forces(pool);
  const double tau = profile_.tau;
  profile_.tau = 0.0;
  update_bias(ensemble_, model_, profile_, 0.0, pool, &forces_);
  profile_.tau = tau;
}

void AbfParticleSimulation::advance(double dt, WorkerPool* pool) {
  compute_forces(pool);
  update_bias(ensemble_, model_, profile_, dt, pool, &forces_);
  const bool sample =
      options_.track_ito && ensemble_.step_count % std::max<std::size_t>(options_.ito_stride, 1) == 0;
  StepOptions so;
  so.pool = pool;
  so.potential_gradients = &grads_;
  if (sample) {
    prev_ = ensemble_.positions;
    so.noise_out = &noise_;
  }
  step(ensemble_, model_, profile_, dt, options_.scheme, so);
  if (!sample) return;
  for (std::size_t p = 0; p < prev_.size(); ++p) {
    const double est = ito_force_estimate(prev_[p], ensemble_.positions[p], model_, profile_, dt, noise_[p]);
    ito_.add(profile_.bins.locate(coordinate(model_, prev_[p])), est, forces_[p]);
  }
}

void write_snapshot_csv(const std::string& path, const ParticleEnsemble& ensemble) {
  csv::Writer w(path, {"particle_id", "x", "y"});
  for (std::size_t p = 0; p < ensemble.positions.size(); ++p) {
    w.cell(static_cast<std::uint64_t>(p)).cell(ensemble.positions[p].x).cell(ensemble.positions[p].y);
    w.end_row();
  }
}

void write_bias_csv(const std::string& path, const BiasProfile& profile) {
  csv::Writer w(path, {"bin_lo", "bin_hi", "force", "occupancy"});
  for (std::size_t b = 0; b < profile.bins.n; ++b) {
    w.cell(profile.bins.edge(b)).cell(profile.bins.edge(b + 1)).cell(profile.force[b]);
    w.cell(static_cast<std::uint64_t>(profile.occupancy[b]));
    w.end_row();
  }
}

}  // namespace abflab::particles
