#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "abflab/diagnostics.hpp"
#include "abflab/oracle.hpp"
#include "abflab/pde.hpp"

using namespace abflab;
using namespace abflab::diagnostics;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> gaussian(const Axis& ax, double mean) {
  std::vector<double> v(ax.n);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.n; ++i) s += v[i] = std::exp(-0.5 * std::pow(ax.center(i) - mean, 2));
  for (auto& x : v) x /= s * ax.width();
  return v;
}

DensityField random_field(const Grid2D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 2.0);
  DensityField f{g, std::vector<double>(g.size()), 0.0};
  for (auto& v : f.values) v = u(rng);
  const double m = f.mass();
  for (auto& v : f.values) v /= m;
  return f;
}

}  // namespace

TEST_CASE("relative entropy") {
  const Axis ax{-12, 12, 4800, false};
  const auto p = gaussian(ax, 0.0);
  CHECK(relative_entropy(p, p, ax.width()) == 0.0);
  CHECK(relative_entropy(p, gaussian(ax, 0.5), ax.width()) == doctest::Approx(0.125).epsilon(1e-4 / 0.125));

  std::vector<double> q = p;
  q[2400] = 0.0;
  std::size_t bad = 0;
  CHECK(std::isinf(relative_entropy(p, q, ax.width(), &bad)));
  CHECK(bad == 2400);
}

TEST_CASE("relative entropy near equality keeps full precision") {
  // p = q (1 + eps cos) has entropy ~ eps^2 / 4 per unit length
  const Axis ax{0, 1, 1000, true};
  std::vector<double> p(ax.n), q(ax.n, 1.0);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < ax.n; ++i) p[i] = 1.0 + eps * std::cos(2 * kPi * ax.center(i));
  CHECK(relative_entropy(p, q, ax.width()) == doctest::Approx(eps * eps / 4).epsilon(1e-6));
}

TEST_CASE("fisher information") {
  const Axis ax{-12, 12, 4800, false};
  const auto p = gaussian(ax, 0.0);
  CHECK(fisher_information(p, p, ax) == 0.0);
  CHECK(fisher_information(p, gaussian(ax, 0.5), ax) == doctest::Approx(0.25).epsilon(1e-3 / 0.25));
  auto z = p;
  z[10] = 0.0;
  CHECK(std::isinf(fisher_information(z, p, ax)));
}

TEST_CASE("fisher information along the heat flow") {
  const auto m = fields::make_test_model({1, 0.5, 4});
  const Axis ax = m.z_axis(256);
  Density1D p{ax, std::vector<double>(256), 0.0};
  for (std::size_t i = 0; i < 256; ++i) p.values[i] = 1.0 + 0.1 * std::cos(2 * kPi * ax.center(i));
  const std::vector<double> one(256, 1.0);
  const double i0 = fisher_information(p.values, one, ax);
  pde::FokkerPlanck1D s(m, ax, pde::MarginalKind::heat_torus);
  const auto n = static_cast<std::size_t>(std::ceil(0.05 / s.admissible_dt()));
  for (std::size_t k = 0; k < n; ++k) s.step(p, 0.05 / double(n));
  const double i1 = fisher_information(p.values, one, ax);
  CHECK(i1 == doctest::Approx(i0 * std::exp(-8 * kPi * kPi * 0.05)).epsilon(0.02));
  CHECK(i1 <= i0 * std::exp(-8 * kPi * kPi * 0.05) * 1.02);
}

TEST_CASE("entropy decomposition") {
  const auto m = fields::make_test_model({1, 0.5, 4});
  const auto g = m.grid(32, 48);
  const auto eq = oracle::compute_equilibrium(m, g);

  const auto zero = entropy_decomposition(eq.psi_inf, eq.psi_inf);
  CHECK(std::abs(zero.E_total) < 1e-10);
  CHECK(std::abs(zero.E_macro) < 1e-10);
  CHECK(std::abs(zero.E_micro) < 1e-10);

  // equilibrium conditionals, perturbed marginal
  DensityField f = eq.psi_inf;
  for (std::size_t i = 0; i < g.x.n; ++i)
    for (std::size_t j = 0; j < g.y.n; ++j) f.at(i, j) *= 1.0 + 0.4 * std::sin(2 * kPi * g.x.center(i));
  const auto parts = entropy_decomposition(f, eq.psi_inf);
  CHECK(parts.E_micro < 1e-8);
  CHECK(parts.E_total == doctest::Approx(parts.E_macro).epsilon(1e-8));
  CHECK(parts.E_macro > 0.01);

  std::mt19937_64 rng(12345);
  for (int r = 0; r < 10; ++r) {
    const auto p = random_field(g, rng);
    const auto e = entropy_decomposition(p, eq.psi_inf);
    CHECK(std::abs(e.E_total - e.E_macro - e.E_micro) < 1e-10);
    CHECK(e.valid);
  }
}

TEST_CASE("csiszar-kullback on random pairs") {
  const Axis ax{0, 1, 40, true};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> p(ax.n), q(ax.n);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < ax.n; ++i) {
      sp += p[i] = u(rng);
      sq += q[i] = u(rng);
    }
    for (std::size_t i = 0; i < ax.n; ++i) {
      p[i] /= sp * ax.width();
      q[i] /= sq * ax.width();
    }
    CHECK(total_variation(p, q, ax.width()) <= std::sqrt(2 * relative_entropy(p, q, ax.width())) + 1e-12);
  }
}

TEST_CASE("force error") {
  const auto m = fields::make_test_model({1, 0.5, 4});
  const auto prof = oracle::compute_free_energy(m, oracle::profile_grid(m, 257));
  const Axis ax = m.z_axis(64);
  std::vector<double> a(ax.n), flat(ax.n, 1.0);
  for (std::size_t i = 0; i < ax.n; ++i) a[i] = prof.Aprime_at(ax.center(i));
  CHECK(force_error(a, prof, flat, ax) == 0.0);
  for (auto& v : a) v += 0.3;
  CHECK(force_error(a, prof, flat, ax) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("decay rate fits") {
  std::vector<double> t, v;
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.1 * i);
    v.push_back(std::exp(-3.0 * 0.1 * i));
  }
  const auto f = fit_decay_rate(t, v);
  CHECK(f.rate == doctest::Approx(3.0).epsilon(1e-6 / 3));
  CHECK(f.r_squared > 0.999999);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> tn, vn;
  for (int i = 0; i < 200; ++i) {
    tn.push_back(0.01 * i);
    vn.push_back(std::exp(-2.0 * 0.01 * i) * (1.0 + noise(rng)));
  }
  CHECK(fit_decay_rate(tn, vn).rate == doctest::Approx(2.0).epsilon(0.05));

  const std::vector<double> c(10, 0.7);
  const auto fc = fit_decay_rate(t, c);
  CHECK(fc.rate == 0.0);
  CHECK(fc.r_squared == 1.0);

  auto cut = v;
  cut[4] = 0.0;
  CHECK_THROWS(fit_decay_rate(t, cut));
  cut = v;
  cut[7] = -1.0;
  const auto ft = fit_decay_rate(t, cut);
  CHECK(ft.truncated);
  CHECK(ft.points == 7);
}

TEST_CASE("convergence bound formula") {
  const double M = kPi, rho = 4 * std::exp(-2.0), r = 4 * kPi * kPi;
  const double em0 = 0.02, i0 = 0.5;
  const double tail = M * std::sqrt(i0 / (2 * rho));
  const double C = 2 * std::max(std::sqrt(em0), tail / std::abs(rho - r));
  CHECK(micro_entropy_bound(0.0, em0, i0, M, rho, 1.0, r, 1.0) == doctest::Approx(C));
  CHECK(micro_entropy_bound(2.0, em0, i0, M, rho, 1.0, r, 1.0) == doctest::Approx(C * std::exp(-2 * rho)));
  // beta scales the rates
  CHECK(micro_entropy_bound(2.0, em0, i0, M, rho, 1.0, r, 2.0) ==
        doctest::Approx(2 * std::max(std::sqrt(em0), tail / (std::abs(rho - r) / 2)) * std::exp(-rho)));
  // resonant case
  CHECK(micro_entropy_bound(1.0, em0, i0, M, 2.0, 1.0, 2.0, 1.0) ==
        doctest::Approx((std::sqrt(em0) + M * std::sqrt(i0 / 4.0)) * std::exp(-2.0)));
}
