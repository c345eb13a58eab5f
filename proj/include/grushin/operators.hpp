#ifndef GRUSHIN_OPERATORS_HPP
#define GRUSHIN_OPERATORS_HPP

#include <array>
#include <vector>

#include "grushin/grid.hpp"

namespace grushin {

/// Weighted gradient sampled once per cell (cell centers). Component a < m is
/// du/dx_a; component m+j already carries the |x|^gamma weight evaluated at
/// the cell-center x.
struct GradientField {
  Grid grid;
  std::array<std::vector<double>, kMaxDim> comp;
};

GradientField grushin_gradient(const Field& u);

/// sum over cells of the corner-averaged (|grad_g u|^2 + delta^2)^{p/2} times
/// the cell measure. delta = 0 gives the plain p-Dirichlet energy.
/// Every corner sample shares the cell-center |x|^gamma weight, so a cell
/// centered on {x = 0} contributes nothing for fields depending on y alone.
double dirichlet_p_energy(const Field& u, double delta);

/// Nodal gradient of dirichlet_p_energy(u, delta)/p: the weak form of the
/// p-Laplacian tested against nodal hat functions. Dual pairing with any
/// Dirichlet test field equals the directional derivative of the energy by
/// construction. Boundary rows are zeroed for Dirichlet fields.
Field p_laplacian_apply(const Field& u, double delta);

struct EnergyBreakdown {
  double dirichlet_p = 0.0;   // integral (|grad_g u|^2 + delta^2)^{p/2}
  double lower_order_q = 0.0; // integral |u|^q
  double critical_term = 0.0; // integral |u|^{p_star}
  double total_J = 0.0;       // dirichlet_p/p - lambda lower/q - critical/p_star
  double lambda = 0.0;
  double q = 0.0;
};

/// J_lambda(u) with its term breakdown. Requires p <= q < p_star and a
/// Dirichlet field.
EnergyBreakdown bn_energy(const Field& u, double lambda, double q, double delta);

/// Nodal gradient of bn_energy. Rows outside `mask` (when given) and on the
/// grid boundary are zero.
Field weak_residual_bn(const Field& u, double lambda, double q, double delta,
                       const DomainMask* mask = nullptr);

/// Linear gamma-weighted stiffness action (the p = 2, delta = 0 flux), used
/// as the H^1_gamma metric by the solvers.
Field stiffness_apply(const Field& u);

/// Stiffness action with the p-coefficient (|grad_g state|^2 + delta^2)^{(p-2)/2}
/// frozen at `state` (the lagged-diffusivity linearization). Equals
/// stiffness_apply for p = 2.
Field frozen_stiffness_apply(const Field& state, const Field& input, double delta);

/// Diagonal of the stiffness form plus the lumped mass, for preconditioning.
std::vector<double> metric_diagonal(const Grid& g);

/// Diagonal of the frozen-coefficient form plus the lumped mass.
std::vector<double> frozen_metric_diagonal(const Field& state, double delta);

/// Line-Jacobi factorization of the metric along the last axis: tridiagonal
/// solves absorb the |x|^{2 gamma}-weighted coupling that makes the operator
/// anisotropic on wide boxes. `state` supplies the frozen p-coefficient
/// (null: p = 2 weights).
struct LineMetric {
  Grid grid;
  std::vector<double> diag; // full metric diagonal (mass + stiffness)
  std::vector<double> off;  // coupling to the next node along the last axis
  /// z = approx K^{-1} r by one tridiagonal solve per line.
  void apply(const Field& r, Field& z) const;
};
LineMetric build_line_metric(const Grid& g, const Field* state, double delta);

/// Lumped (trapezoidal) mass application: w_i u_i.
Field mass_apply(const Field& u);

/// l2 norm of the Riesz representative of a dual (residual) vector:
/// sqrt(sum r_i^2 / w_i). The scalar reported as solver residual.
double residual_norm(const Field& r);

/// Dual pairing sum_i a_i b_i.
double dot(const Field& a, const Field& b);

} // namespace grushin

#endif
