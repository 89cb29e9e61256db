#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace abflab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm_sq(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::sqrt(norm_sq(a)); }

/// Row-major 2x2 matrix.
struct Mat2 {
  std::array<std::array<double, 2>, 2> m{};

  static Mat2 identity() { return Mat2{{{{1.0, 0.0}, {0.0, 1.0}}}}; }
  static Mat2 zero() { return Mat2{}; }

  double operator()(int i, int j) const { return m[i][j]; }
  double& operator()(int i, int j) { return m[i][j]; }

  Vec2 apply(Vec2 v) const { return {m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y}; }
  double trace() const { return m[0][0] + m[1][1]; }

  friend Mat2 operator+(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
    return r;
  }
  friend Mat2 operator-(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
    return r;
  }
  friend Mat2 operator*(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
    return r;
  }
  friend Mat2 operator*(double s, const Mat2& a) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r.m[i][j] = s * a.m[i][j];
    return r;
  }
};

inline Mat2 outer(Vec2 a, Vec2 b) { return Mat2{{{{a.x * b.x, a.x * b.y}, {a.y * b.x, a.y * b.y}}}}; }

/// Uniform cell partition of [lo, hi); periodic axes identify hi with lo.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 1;
  bool periodic = false;

  double width() const { return (hi - lo) / static_cast<double>(n); }
  double length() const { return hi - lo; }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }
  double edge(std::size_t i) const { return lo + static_cast<double>(i) * width(); }

  /// Maps a coordinate into [lo, hi) on periodic axes; identity otherwise.
  double wrap(double v) const {
    if (!periodic) return v;
    const double L = length();
    double w = v - L * std::floor((v - lo) / L);
    if (w >= hi) w -= L;  // floor rounding at the top edge
    if (w < lo) w = lo;
    return w;
  }

  /// Cell containing v (wrapped on periodic axes, clamped otherwise).
  std::size_t locate(double v) const {
    const double u = (wrap(v) - lo) / width();
    if (!(u > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(u);
    return i >= n ? n - 1 : i;
  }

  std::vector<double> centers() const {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = center(i);
    return c;
  }
  std::vector<double> edges() const {
    std::vector<double> e(n + 1);
    for (std::size_t i = 0; i <= n; ++i) e[i] = edge(i);
    return e;
  }

  friend bool operator==(const Axis&, const Axis&) = default;
};

struct Grid2D {
  Axis x;
  Axis y;

  std::size_t size() const { return x.n * y.n; }
  double cell_area() const { return x.width() * y.width(); }
  /// Storage is x-major: each x column is contiguous in y.
  std::size_t index(std::size_t i, std::size_t j) const { return i * y.n + j; }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Cell-averaged density on a 2D grid, stored as Grid2D::index.
struct DensityField {
  Grid2D grid;
  std::vector<double> values;
  double time = 0.0;

  double& at(std::size_t i, std::size_t j) { return values[grid.index(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return values[grid.index(i, j)]; }
  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_area();
  }
};

/// Cell-averaged density on a 1D grid.
struct Density1D {
  Axis axis;
  std::vector<double> values;
  double time = 0.0;

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * axis.width();
  }
};

}  // namespace abflab
