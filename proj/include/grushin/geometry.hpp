#ifndef GRUSHIN_GEOMETRY_HPP
#define GRUSHIN_GEOMETRY_HPP

#include "grushin/params.hpp"

namespace grushin {

/// Anisotropic gauge d(z) = (|x|^{2(g+1)} + (g+1)^2 |y|^2)^{1/(2(g+1))}.
/// Nonnegative, zero exactly at z = 0, homogeneous of degree one under
/// dilate(). Reduces to the Euclidean norm at gamma = 0.
double gauge(const GrushinParams& params, const Point& z);

/// Anisotropic dilation (x, y) -> (rho x, rho^{gamma+1} y), rho > 0.
Point dilate(const GrushinParams& params, double rho, const Point& z);

/// d-gauge of the difference z - w (the natural translate of the gauge for
/// ball membership tests; translations act on the y-block only in the
/// invariance structure, but the formula is valid for any w).
double gauge_dist(const GrushinParams& params, const Point& z, const Point& w);

/// Profile of the fundamental solution at the origin:
///   d(z)^{(p-N_gamma)/(p-1)}    p != N_gamma,
///   -log d(z)                   p  = N_gamma.
/// z = 0 is rejected (singular point).
double fundamental_profile(const GrushinParams& params, const Point& z);

/// Lebesgue measure of the gauge ball {d < R} = |B_1| R^{N_gamma}.
/// |B_1| is evaluated once per (m, n, gamma) by numerical quadrature of a
/// smoothed indicator on the radial-reduced (|x|, |y|) quarter plane at
/// resolution 512 per axis, verified against the half-resolution value, and
/// cached.
double gauge_ball_volume(const GrushinParams& params, double R);

/// Unit-ball constant |B_1| itself (cached as above).
double unit_gauge_ball_volume(const GrushinParams& params);

/// Magnitude of the weighted gradient of the gauge: |grad_g d| = (|x|/d)^gamma.
/// Used by cutoff constructions. z must be nonzero.
double gauge_gradient_magnitude(const GrushinParams& params, const Point& z);

/// Weighted gradient vector of the gauge at z (components in the same frame
/// as weighted gradients elsewhere: x-block plain, y-block carries |x|^gamma).
Point gauge_gradient(const GrushinParams& params, const Point& z);

} // namespace grushin

#endif
