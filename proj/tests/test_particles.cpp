#include <cmath>
#include <numbers>

#include "doctest.h"

#include "abflab/errors.hpp"
#include "abflab/particles.hpp"
#include "abflab/rng.hpp"

using namespace abflab;
using namespace abflab::particles;

namespace {

constexpr double kPi = std::numbers::pi;

fields::ModelProblem test_model() { return fields::make_test_model({1.0, 0.5, 4.0}); }

fields::ModelProblem zero_potential() {
  auto m = fields::make_test_model({0.0, 0.0, 1.0});
  m.potential.value = [](Vec2) { return 0.0; };
  m.potential.gradient = [](Vec2) { return Vec2{}; };
  m.potential.hessian = [](Vec2) { return Mat2::zero(); };
  return m;
}

fields::ModelProblem parabolic(fields::ModelProblem m, double b) {
  m.xi.kind = fields::XiKind::custom;
  m.xi.custom = {[b](Vec2 q) { return q.x + b * q.y * q.y; }, [b](Vec2 q) { return Vec2{1.0, 2 * b * q.y}; },
                 [b](Vec2) { return Mat2{{{{0.0, 0.0}, {0.0, 2 * b}}}}; }};
  return m;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using rng::Counter;
  CHECK(rng::philox4x32({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(rng::philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
        Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(rng::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("box-muller normals have unit moments") {
  const int n = 200000;
  double s1 = 0, s2 = 0;
  for (int p = 0; p < n; ++p) {
    const auto g = rng::box_muller(rng::draw(3, p, 0, rng::Stream::dynamics));
    s1 += g.g0 + g.g1;
    s2 += g.g0 * g.g0 + g.g1 * g.g1;
  }
  CHECK(std::abs(s1 / (2 * n)) < 4 / std::sqrt(2.0 * n));
  CHECK(std::abs(s2 / (2 * n) - 1) < 4 * std::sqrt(2.0 / (2 * n)));
}

TEST_CASE("point init") {
  const auto e = init_ensemble(test_model(), 4, {InitKind::point, {0.5, 0.0}}, 1);
  for (const auto& q : e.positions) {
    CHECK(q.x == 0.5);
    CHECK(q.y == 0.0);
  }
  CHECK(e.warnings.size() == 1);
}

TEST_CASE("uniform init fills every bin and is reproducible") {
  const auto m = test_model();
  const auto a = init_ensemble(m, 100000, {InitKind::uniform}, 42);
  const auto b = init_ensemble(m, 100000, {InitKind::uniform}, 42);
  const auto c = init_ensemble(m, 100000, {InitKind::uniform}, 43);
  const auto h = empirical_marginal(a, m.z_axis(32), m);
  for (double v : h.values) CHECK(v > 0.0);
  bool same = true, differs = false;
  for (std::size_t p = 0; p < a.positions.size(); ++p) {
    same = same && a.positions[p].x == b.positions[p].x && a.positions[p].y == b.positions[p].y;
    differs = differs || a.positions[p].x != c.positions[p].x;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("uniform histogram is close to 1 and has unit mass") {
  const auto m = test_model();
  const auto e = init_ensemble(m, 100000, {InitKind::uniform}, 7);
  const auto h = empirical_marginal(e, m.z_axis(32), m);
  double mass = 0.0, sup = 0.0;
  for (double v : h.values) {
    mass += v * h.axis.width();
    sup = std::max(sup, std::abs(v - 1.0));
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sup <= 0.06);
}

TEST_CASE("point histogram puts 1/w in one bin") {
  const auto m = test_model();
  const auto e = init_ensemble(m, 10, {InitKind::point, {0.3, 0.1}}, 1);
  const auto ax = m.z_axis(16);
  const auto h = empirical_marginal(e, ax, m);
  for (std::size_t b = 0; b < ax.n; ++b) CHECK(h.values[b] == (b == ax.locate(0.3) ? 1.0 / ax.width() : 0.0));
}

TEST_CASE("gibbs and equilibrium init x marginals") {
  const auto m = test_model();
  const auto ax = m.z_axis(16);
  // Gibbs: proportional to Z_sigma(z) = sqrt(2 pi / k) exp(-cos + a^2 sin^2 / (2k))
  std::vector<double> ref(ax.n, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < ax.n; ++b) {
    for (int s = 0; s < 200; ++s) {
      const double z = ax.edge(b) + (s + 0.5) * ax.width() / 200;
      const double sn = std::sin(2 * kPi * z);
      ref[b] += std::exp(-std::cos(2 * kPi * z) + 0.25 * sn * sn / 8.0);
    }
    total += ref[b];
  }
  const auto g = init_ensemble(m, 100000, {InitKind::gibbs}, 9);
  const auto hg = empirical_marginal(g, ax, m);
  for (std::size_t b = 0; b < ax.n; ++b) {
    const double expect = ref[b] / (total * ax.width());
    CHECK(std::abs(hg.values[b] - expect) < 4 * std::sqrt(expect / (100000 * ax.width())));
  }
  double s2 = 0.0;
  for (const auto& q : g.positions) s2 += q.y * q.y;
  CHECK(s2 / 100000 > 0.25);

  // Equilibrium of the biased dynamics: uniform in z on the torus
  const auto e = init_ensemble(m, 100000, {InitKind::equilibrium}, 9);
  const auto he = empirical_marginal(e, ax, m);
  for (double v : he.values) CHECK(std::abs(v - 1.0) < 4 * std::sqrt(1.0 / (100000 * ax.width())));
}

TEST_CASE("update_bias: symmetric pair, single particle, relaxation") {
  const auto m = test_model();
  ParticleEnsemble e;
  e.positions = {{0.1, 0.0}, {0.1, 0.2}};
  auto prof = make_bias_profile(m, 8);
  const std::vector<double> f{1.0, -1.0};
  update_bias(e, m, prof, 0.01, nullptr, &f);
  CHECK(prof.force[0] == 0.0);
  CHECK(prof.occupancy[0] == 2);
  CHECK(prof.empty_bins == 7);

  ParticleEnsemble one;
  one.positions = {{0.25, 0.0}};
  auto p1 = make_bias_profile(m, 32);
  update_bias(one, m, p1, 0.01);
  CHECK(p1.force[p1.bins.locate(0.25)] == doctest::Approx(-2 * kPi).epsilon(1e-14));

  auto slow = make_bias_profile(m, 32, 10.0);
  slow.force.assign(32, 1.0);
  update_bias(one, m, slow, 0.01);
  const std::size_t b = slow.bins.locate(0.25);
  CHECK(slow.force[b] == doctest::Approx(1.0 + 0.001 * (-2 * kPi - 1.0)).epsilon(1e-14));
  CHECK(std::abs(slow.force[b] - 1.0) <= 0.001 * std::abs(-2 * kPi - 1.0) * (1 + 1e-12));
  CHECK(slow.force[0] == 1.0);  // empty bins keep their value
}

TEST_CASE("non-finite forces name the particle") {
  const auto m = test_model();
  ParticleEnsemble e;
  e.positions = {{0.1, 0.0}, {0.2, 0.0}, {0.3, 0.0}};
  auto prof = make_bias_profile(m, 4);
  const std::vector<double> f{1.0, std::nan(""), 2.0};
  try {
    update_bias(e, m, prof, 0.01, nullptr, &f);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& err) {
    CHECK(err.particle() == 1);
  }
}

TEST_CASE("zero drift and zero noise leave positions unchanged") {
  const auto m = zero_potential();
  auto e = init_ensemble(m, 50, {InitKind::uniform}, 5);
  const auto before = e.positions;
  const auto prof = make_bias_profile(m, 8);
  StepOptions so;
  so.zero_noise = true;
  step(e, m, prof, 0.01, Scheme::metric, so);
  for (std::size_t p = 0; p < before.size(); ++p) {
    CHECK(e.positions[p].x == before[p].x);
    CHECK(e.positions[p].y == before[p].y);
  }
  CHECK(e.step_count == 1);
  CHECK(e.time == 0.01);
}

TEST_CASE("metric and plain coincide for xi = x") {
  const auto m = test_model();
  auto a = init_ensemble(m, 1000, {InitKind::uniform}, 11);
  auto b = a;
  auto prof = make_bias_profile(m, 16);
  update_bias(a, m, prof, 0.0);
  for (int k = 0; k < 5; ++k) {
    step(a, m, prof, 1e-3, Scheme::metric);
    step(b, m, prof, 1e-3, Scheme::plain);
  }
  for (std::size_t p = 0; p < a.positions.size(); ++p) {
    CHECK(a.positions[p].x == b.positions[p].x);
    CHECK(a.positions[p].y == b.positions[p].y);
  }
}

TEST_CASE("harmonic y reaches the Ornstein-Uhlenbeck variance") {
  const double k = 4.0, beta = 1.0, dt = 1e-3;
  const auto m = fields::make_test_model({0.0, 0.0, k}, {.beta = beta});
  auto e = init_ensemble(m, 5000, {InitKind::point, {0.5, 0.0}}, 21);
  const auto prof = make_bias_profile(m, 8);
  for (int s = 0; s < 1500; ++s) step(e, m, prof, dt, Scheme::metric);
  double s2 = 0.0, s4 = 0.0;
  for (const auto& q : e.positions) {
    s2 += q.y * q.y;
    s4 += q.y * q.y * q.y * q.y;
  }
  const double n = static_cast<double>(e.positions.size());
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / n);
  CHECK(std::abs(var - 1.0 / (beta * k)) < 3 * se);
}

TEST_CASE("ito estimate without noise returns F at the start for xi = x") {
  const auto m = test_model();
  const auto prof = make_bias_profile(m, 32);
  for (Vec2 q : {Vec2{0.25, 0.0}, Vec2{0.7, 0.5}, Vec2{0.02, -0.3}}) {
    const double dt = 1e-3;
    const Vec2 d = drift(m, prof, q, Scheme::metric);
    const Vec2 next{q.x + d.x * dt, q.y + d.y * dt};
    const double f = fields::local_mean_force(m, q);
    CHECK(d.x == doctest::Approx(-f).epsilon(1e-14));
    CHECK(ito_force_estimate(q, next, m, prof, dt, {0, 0}) == doctest::Approx(f).epsilon(1e-9));
  }
  CHECK_THROWS_AS(ito_force_estimate({0, 0}, {0, 0}, m, prof, 0.0, {0, 0}), std::invalid_argument);
}

TEST_CASE("ito estimate across the torus seam uses the short arc") {
  const auto m = test_model();
  const auto prof = make_bias_profile(m, 8);
  const double est = ito_force_estimate({0.999, 0.0}, {0.001, 0.0}, m, prof, 0.1, {0, 0});
  CHECK(est == doctest::Approx(-0.002 / 0.1));
}

TEST_CASE("binned ito estimates agree with direct F on a curved coordinate") {
  const auto m = parabolic(test_model(), 0.05);
  SimulationOptions so;
  so.track_ito = true;
  so.n_bins = 32;
  AbfParticleSimulation sim(m, init_ensemble(m, 100000, {InitKind::uniform}, 3), so);
  for (int s = 0; s < 10; ++s) sim.advance(1e-4);
  std::size_t occupied = 0;
  for (std::size_t b = 0; b < 32; ++b) {
    if (sim.ito().count[b] < 2) continue;
    ++occupied;
    CHECK(std::abs(sim.ito().mean_ito(b) - sim.ito().mean_f(b)) <= 3 * sim.ito().stderr_diff(b));
  }
  CHECK(occupied == 32);
}

TEST_CASE("ito discrepancy shrinks with dt") {
  // One step from a fixed point; the per-sample estimate has an O(dt) bias on a curved coordinate.
  const auto m = parabolic(test_model(), 0.05);
  const auto prof = make_bias_profile(m, 32);
  const Vec2 q0{0.3, 1.0};
  const double f = fields::local_mean_force(m, q0);
  auto discrepancy = [&](double dt) {
    ParticleEnsemble e;
    e.seed = 17;
    e.positions.assign(400000, q0);
    std::vector<Vec2> g;
    StepOptions so;
    so.noise_out = &g;
    step(e, m, prof, dt, Scheme::metric, so);
    double s = 0.0;
    for (std::size_t p = 0; p < e.positions.size(); ++p) s += ito_force_estimate(q0, e.positions[p], m, prof, dt, g[p]) - f;
    return std::abs(s / static_cast<double>(e.positions.size()));
  };
  const double d1 = discrepancy(2e-2);
  const double d2 = discrepancy(1e-2);
  CHECK(d2 < d1);
}

TEST_CASE("drift is minus the gradient of the effective potential") {
  for (bool curved : {false, true}) {
    auto m = curved ? parabolic(test_model(), 0.2) : test_model();
    auto prof = make_bias_profile(m, 16, 0.0, true);
    for (std::size_t b = 0; b < 16; ++b) prof.force[b] = std::sin(2 * kPi * prof.bins.center(b));
    const double h = 1e-6;
    for (Vec2 q : {Vec2{0.31, 0.2}, Vec2{0.62, -0.7}}) {
      const Vec2 g = m.xi.gradient(q);
      const double g2 = norm_sq(g);
      const double dx = (effective_potential(m, prof, {q.x + h, q.y}, Scheme::metric) -
                         effective_potential(m, prof, {q.x - h, q.y}, Scheme::metric)) / (2 * h);
      const double dy = (effective_potential(m, prof, {q.x, q.y + h}, Scheme::metric) -
                         effective_potential(m, prof, {q.x, q.y - h}, Scheme::metric)) / (2 * h);
      const Vec2 d = drift(m, prof, q, Scheme::metric);
      const double scale = curved ? 1.0 / g2 : 1.0;
      CHECK(d.x == doctest::Approx(-scale * dx).epsilon(1e-6));
      CHECK(d.y == doctest::Approx(-scale * dy).epsilon(1e-6));
    }
  }
}

TEST_CASE("bias profile integration") {
  const auto m = test_model();
  auto p = make_bias_profile(m, 4);
  p.force = {1.0, 2.0, 3.0, -6.0};
  CHECK(p.integrated(0.0) == 0.0);
  CHECK(p.integrated(0.375) == doctest::Approx(0.25 + 0.25));
  CHECK(p.integrated(1.0) == doctest::Approx(0.0).scale(1));
  CHECK(p.integrated(1.125) == doctest::Approx(0.125));
  p.interpolate = true;
  CHECK(p.lookup(0.125) == 1.0);
  CHECK(p.lookup(0.25) == doctest::Approx(1.5));
  CHECK(p.lookup(0.0) == doctest::Approx(-2.5));
}

TEST_CASE("a diverging particle is reported with its index") {
  auto m = test_model();
  m.potential.gradient = [](Vec2 q) { return q.x > 0.5 ? Vec2{std::nan(""), 0} : Vec2{}; };
  ParticleEnsemble e;
  e.positions = {{0.1, 0}, {0.7, 0}, {0.9, 0}};
  try {
    step(e, m, make_bias_profile(m, 4), 1e-3, Scheme::metric);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& err) {
    CHECK(err.particle() == 1);
    CHECK(err.step() == 0);
  }
}

TEST_CASE("simulation is independent of the thread count") {
  const auto m = test_model();
  auto run = [&](std::size_t threads) {
    WorkerPool pool(threads);
    AbfParticleSimulation sim(m, init_ensemble(m, 5000, {InitKind::uniform}, 99), {});
    for (int s = 0; s < 20; ++s) sim.advance(1e-3, &pool);
    return sim.ensemble().positions;
  };
  const auto a = run(1);
  const auto b = run(3);
  bool same = true;
  for (std::size_t p = 0; p < a.size(); ++p) same = same && a[p].x == b[p].x && a[p].y == b[p].y;
  CHECK(same);
}
