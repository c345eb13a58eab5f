#ifndef GRUSHIN_ANALYSIS_HPP
#define GRUSHIN_ANALYSIS_HPP

#include <array>
#include <string>
#include <vector>

#include "grushin/operators.hpp"

namespace grushin {

/// Log-log decay fit of a positive field against the gauge over annuli.
struct DecayFit {
  double slope = 0.0;      // least-squares slope of mean log u vs mean log d
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_lower = 0.0; // same fit through the lower-decile annulus values
  struct Annulus {
    double r_inner = 0.0, r_outer = 0.0;
    double mean_log_u = 0.0, mean_log_d = 0.0;
    double lower_log_u = 0.0; // mean of the lowest decile of log u
    std::size_t nodes = 0;
  };
  std::vector<Annulus> annuli;
};

/// Annulus statistics of log u over geometric gauge annuli in [r_min, r_max].
/// Only strictly positive nodes at least `boundary_margin_cells` cells from
/// the grid boundary enter. An annulus without such nodes is an error.
DecayFit decay_fit(const Field& u, double r_min, double r_max, int n_annuli,
                   int boundary_margin_cells = 2);

/// Cutoff concentration family: phi(z) eps^{-(N_gamma-p)/p} U(dilate(1/eps, z))
/// with phi a C^2 gauge cutoff, identically 1 on B_{R_cut/2} and 0 outside
/// B_{R_cut}. Errors when eps < 4 max_spacing / R_cut (resolution guard) or
/// when B_{R_cut} does not fit in the target box.
Field build_test_function(const Field& U, double eps, double R_cut, const Grid& target);

enum class ExpansionCase { Ngamma_gt_p2, Ngamma_eq_p2, Ngamma_lt_p2 };

struct ExpansionReport {
  std::vector<double> epsilons; // strictly decreasing
  struct Row {
    double eps = 0.0;
    double grad_p_energy = 0.0;   // ||grad_g u_eps||_p^p
    double crit_norm_pstar = 0.0; // ||u_eps||_{p*}^{p*}
    double lower_norm_q = 0.0;    // ||u_eps||_q^q
    double norm_p_p = 0.0;        // ||u_eps||_p^p
  };
  std::vector<Row> rows;
  double profile_energy = 0.0;    // ||grad_g U||_p^p of the normalized profile
  double profile_crit = 0.0;      // ||U||_{p*}^{p*} (equal by normalization)
  double fitted_grad_exponent = 0.0;  // rate of grad_p_energy - profile_energy
  double fitted_crit_exponent = 0.0;  // rate of profile_crit - crit_norm_pstar
  double fitted_q_exponent = 0.0;     // rate of lower_norm_q
  double fitted_p_exponent = 0.0;     // rate of norm_p_p (the trichotomy fit)
  ExpansionCase case_label = ExpansionCase::Ngamma_gt_p2;
  bool log_correction_detected = false;
  double power_fit_rss = 0.0;     // residual of the best pure power model
  double log_model_rss = 0.0;     // residual of the C eps^p |log eps| model
};

/// Asymptotics of the cutoff family built from the profile U (resampled by
/// exact dilation pullback onto U's own grid, where the anisotropic core is
/// resolved). U is rescaled internally so that its p-energy equals its
/// critical mass; q in [1, p*) selects the subcritical column.
ExpansionReport expansion_study(const Field& U, const std::vector<double>& eps_list,
                                double q, double R_cut);

/// (||grad_g u||_p^p - lambda ||u||_p^p) / ||u||_{p*}^p.
double q_lambda(const Field& u, double lambda);

/// Concentration function: the largest |u|^{p*} mass carried by a gauge ball
/// of radius rho centered on the degeneration set {x = 0}. `centers` holds
/// the y-coordinates of candidate centers (length n each).
double concentration_function(const Field& u, double rho,
                              const std::vector<std::vector<double>>& centers);

struct ConcentrationProfile {
  std::vector<double> rhos;
  std::vector<double> q_values;
  double half_rho = 0.0;
  std::vector<double> center; // y-vector of the argmax center
};

/// Sweep of the concentration function plus the half-mass radius.
ConcentrationProfile concentration_profile(const Field& u, const std::vector<double>& rhos);

/// The normalization used to fix the dilation gauge of minimizing sequences:
/// finds (e, rho) with the half-|u|^{p*}-mass inside B_rho((0,e)) and returns
/// the rescaled field whose unit ball carries half the mass.
struct ConcentrationNormalization {
  std::vector<double> center; // e
  double rho_half = 0.0;
  Field normalized;           // rescale_field(u, e, rho_half)
};
ConcentrationNormalization concentration_normalize(const Field& u);

/// Per-term defect | ||u_k||_s^s - ||u_k - u||_s^s - ||u||_s^s |.
std::vector<double> brezis_lieb_defect(const std::vector<Field>& u_seq, const Field& u_limit,
                                       double s);

/// Pointwise left-hand side of the two-function log-gradient inequality:
///   |gu|^{p-2} gu . (gu - d[(v^p/u^p) u]) + (u <-> v),
/// expanded algebraically in (u, v, gu, gv). Nonnegative; zero exactly when
/// gu/u = gv/v.
double log_gradient_defect(double u_val, double v_val, const std::vector<double>& gu,
                           const std::vector<double>& gv, double p);

/// Reference lower bound of the same inequality:
///   (u^p + v^p) |gu/u - gv/v|^p                    for p >= 2,
///   (u^p + v^p) |gu/u - gv/v|^2 / (|gu/u| + |gv/v|)^{2-p}   for 1 < p < 2.
double log_gradient_reference(double u_val, double v_val, const std::vector<double>& gu,
                              const std::vector<double>& gv, double p);

/// Closed-form Euclidean best constant (the classical sharp Sobolev constant
/// in the quotient normalization), used as the gamma = 0 oracle.
double talenti_best_constant(double N, double p);

} // namespace grushin

#endif
