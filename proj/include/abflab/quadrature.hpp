#pragma once

#include <cstddef>
#include <functional>

namespace abflab::quadrature {

struct TrapezoidOptions {
  std::size_t min_intervals = 64;
  std::size_t max_intervals = 65536;
  double tolerance = 1e-10;
};

/// Results for Z = int exp(-u(y)) dy and int f(y) exp(-u(y)) dy over [lo, hi].
struct WeightedIntegral {
  double log_z = 0.0;
  double mean_f = 0.0;  ///< int f e^-u / Z; 0 when no f is supplied
  std::size_t intervals = 0;
};

/// Composite trapezoid under interval doubling until the relative change drops
/// below tolerance. Sums run in a log-shifted frame so large u does not underflow.
/// Throws QuadratureError (tagged with `tag`) when the cap is reached first.
WeightedIntegral weighted_trapezoid(const std::function<double(double)>& u, const std::function<double(double)>& f,
                                    double lo, double hi, const TrapezoidOptions& options = {}, double tag = 0.0);

}  // namespace abflab::quadrature
