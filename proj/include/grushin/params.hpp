#ifndef GRUSHIN_PARAMS_HPP
#define GRUSHIN_PARAMS_HPP

#include <array>
#include <cstddef>

#include "grushin/errors.hpp"

namespace grushin {

/// Highest supported ambient dimension m+n.
inline constexpr int kMaxDim = 4;

using Coord = std::array<double, kMaxDim>;

/// Structural constants of the problem: block dimensions m, n, the degeneracy
/// exponent gamma of the vector fields, and the integrability exponent p.
/// All derived exponents are computed on demand from these four numbers.
struct GrushinParams {
  int m = 1;          // x-block dimension
  int n = 1;          // y-block dimension
  double gamma = 1.0; // degeneracy exponent, >= 0
  double p = 2.0;     // integrability exponent, > 1
  bool relaxed = false; // true when p >= N_gamma was explicitly permitted

  /// Standard construction: requires 1 < p < N_gamma.
  static GrushinParams make(int m, int n, double gamma, double p);

  /// Permits p >= N_gamma (eigenvalue and fundamental-profile work); the
  /// critical exponent and its derivatives are unavailable on such params.
  static GrushinParams make_relaxed(int m, int n, double gamma, double p);

  int dim() const { return m + n; }

  /// Homogeneous dimension m + (1+gamma) n.
  double n_gamma() const { return double(m) + (1.0 + gamma) * double(n); }

  /// Critical exponent p N_gamma / (N_gamma - p). Requires p < N_gamma.
  double p_star() const;

  /// Decay exponent (N_gamma - p)/(p - 1).
  double decay_alpha() const;

  /// Weak-Lebesgue tail exponent p_star (p-1)/p.
  double q0_weak() const;

  bool operator==(const GrushinParams&) const = default;
};

/// A point z = (x, y) in R^m x R^n. Coordinates 0..m-1 are the x-block,
/// m..m+n-1 the y-block. Unused slots must stay zero.
struct Point {
  Coord c{};

  static Point zero() { return Point{}; }
  double& operator[](int i) { return c[std::size_t(i)]; }
  double operator[](int i) const { return c[std::size_t(i)]; }
};

} // namespace grushin

#endif
