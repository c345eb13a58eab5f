#ifndef GRUSHIN_SOLVERS_HPP
#define GRUSHIN_SOLVERS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "grushin/operators.hpp"

namespace grushin {

struct SolverConfig {
  int max_iters = 600;
  double grad_tol = 1e-6;     // stationarity tolerance (residual_norm scale)
  double step_init = 1.0;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double delta_reg = 1e-8;    // regularization factor, scaled by max|u|/min h
  std::uint64_t seed = 12345;
  bool precondition = true;   // H^1_gamma metric (mass + linear stiffness)
  int cg_iters = 400;         // inner CG cap (deterministic)
  double cg_tol = 3e-2;       // inner CG relative tolerance
  bool multilevel = true;     // coarse-to-fine warm start
  int recenter_every = 50;    // y-recentering cadence for free-space solves
  double init_scale = 1.0;    // dilation applied to the initial profile
  double gauge_beta = 10.0;   // concentration-gauge penalty stiffness
                              // (relative to the initial energy)
  bool natural_boundary = false; // internal: natural-boundary relaxation

  void validate() const;
};

struct QuotientResult {
  double value = 0.0;  // minimized quotient
  Field minimizer;     // normalized to unit target norm
  int iters = 0;
  double residual = 0.0;
  std::vector<std::pair<int, double>> trace;
  bool boundary_mass_warning = false;
  double boundary_mass = 0.0;
};

struct EigenResult {
  double value = 0.0;
  Field mode; // nonnegative, ||mode||_p = 1
  int iters = 0;
  double residual = 0.0;
  std::vector<std::pair<int, double>> trace;
};

struct MountainPassResult {
  double c_lambda = 0.0;
  double threshold = 0.0; // S^{N_gamma/p} / N_gamma from the S estimate used
  bool below_threshold = false;
  Field solution;
  double nehari_t = 1.0;
  double residual = 0.0;
  int iters = 0;
  double nehari_identity_error = 0.0; // |E - lambda A - B| / max terms
  double s_estimate = 0.0;
  double lambda1_estimate = 0.0; // filled when q = p
  std::vector<std::pair<int, double>> trace;
};

/// Projected descent on ||grad_g u||_p^p / ||u||_{p*}^p over the box with
/// zero boundary values. Returns the quotient (the best-constant estimate)
/// and the normalized nonnegative minimizer.
QuotientResult minimize_sobolev_quotient(const Grid& grid, const SolverConfig& config);

/// Smallest Rayleigh quotient ||grad_g u||_p^p / ||u||_p^p over Dirichlet
/// fields supported in the mask.
EigenResult first_eigenvalue(const DomainMask& mask, const SolverConfig& config);

/// The unique t > 0 maximizing t -> J_lambda(t u) along the ray of u:
/// root of E t^{p-1} = lambda A t^{q-1} + B t^{p*-1}. Closed form for
/// lambda = 0 or q = p, safeguarded Newton otherwise.
double nehari_scale(const Field& u, double lambda, double q);

/// Ground-state solve of the critical problem on the mask by descent on the
/// Nehari-reduced energy. s_estimate <= 0 requests a fresh best-constant
/// computation on the same grid.
MountainPassResult solve_brezis_nirenberg(const DomainMask& mask, double lambda, double q,
                                          const SolverConfig& config,
                                          double s_estimate = 0.0);

/// Palais-Smale compactness threshold S^{N_gamma/p} / N_gamma.
double compactness_threshold(double s_estimate, const GrushinParams& params);

/// Cross-check mode: deformation of a discretized path from 0 past the
/// energy barrier; returns the (upper) estimate of the min-max level.
double mountain_pass_level_by_path(const DomainMask& mask, double lambda, double q,
                                   const Field& direction, const SolverConfig& config,
                                   int path_points = 17, int sweeps = 200);

/// The initial guess used by the solvers: (1 + d^{p/(p-1)})^{-(N_gamma-p)/p},
/// optionally dilated, cut to zero at the box boundary (Dirichlet mode).
Field bubble_profile(const Grid& grid, double scale = 1.0, bool dirichlet = true);

/// Best-constant estimation protocol. A single Dirichlet quotient on a box
/// overshoots the free-space constant by the boundary-layer cost, which is
/// linear in the pinned concentration scale. The estimator runs the solver
/// at two scales, extrapolates the quotient to scale zero, and (optionally)
/// removes the remaining O(h^2) discretization bias by Richardson
/// extrapolation against a 2/3-resolution companion grid.
struct BestConstantEstimate {
  double value = 0.0;                 // final estimate
  double fine_extrapolated = 0.0;     // scale-extrapolated value on the grid
  double coarse_extrapolated = 0.0;   // same on the companion grid (if used)
  std::vector<std::pair<double, double>> runs; // (scale, quotient) per solve
};
BestConstantEstimate estimate_sobolev_constant(const Grid& grid, const SolverConfig& config,
                                               double scale_lo = 0.8, double scale_hi = 1.2,
                                               bool richardson = true);

} // namespace grushin

#endif
