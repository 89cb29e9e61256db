#include "abflab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "abflab/errors.hpp"

namespace abflab::quadrature {

WeightedIntegral weighted_trapezoid(const std::function<double(double)>& u, const std::function<double(double)>& f,
                                    double lo, double hi, const TrapezoidOptions& options, double tag) {
  const std::size_t n0 = std::max<std::size_t>(options.min_intervals, 2);
  const double len = hi - lo;

  // Shift from the coarsest level; finer nodes only add terms.
  double ref = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= n0; ++i) ref = std::min(ref, u(lo + len * static_cast<double>(i) / n0));
  if (!std::isfinite(ref)) throw QuadratureError("non-finite integrand", tag);

  double sum_w = 0.0;
  double sum_f = 0.0;
  auto add = [&](double y, double weight) {
    const double w = weight * std::exp(ref - u(y));
    sum_w += w;
    if (f) sum_f += w * f(y);
  };
  for (std::size_t i = 0; i <= n0; ++i) add(lo + len * static_cast<double>(i) / n0, (i == 0 || i == n0) ? 0.5 : 1.0);

  std::size_t n = n0;
  double z = sum_w * len / n;
  double zf = sum_f * len / n;
  while (2 * n <= options.max_intervals) {
    const std::size_t m = 2 * n;
    for (std::size_t i = 1; i < m; i += 2) add(lo + len * static_cast<double>(i) / m, 1.0);
    const double z2 = sum_w * len / m;
    const double zf2 = sum_f * len / m;
    const bool done = std::abs(z2 - z) <= options.tolerance * z2 &&
                      std::abs(zf2 - zf) <= options.tolerance * (std::abs(zf2) + z2);
    n = m;
    z = z2;
    zf = zf2;
    if (done) {
      if (!(z > 0.0) || !std::isfinite(z)) throw QuadratureError("degenerate slice weight", tag);
      return {std::log(z) - ref, zf / z, n};
    }
  }
  std::ostringstream os;
  os.precision(17);
  os << "trapezoid did not converge within " << options.max_intervals << " intervals at z = " << tag;
  throw QuadratureError(os.str(), tag);
}

}  // namespace abflab::quadrature
