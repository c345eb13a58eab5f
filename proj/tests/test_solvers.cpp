#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "grushin/solvers.hpp"

using namespace grushin;

namespace {

std::mt19937_64 rng(424242u);
double uniform(double lo, double hi) { return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53); }

// Independent closed form for the Euclidean best constant (test oracle).
double talenti_best_constant(double N, double p) {
  const double c = std::pow(M_PI, -0.5) * std::pow(N, -1.0 / p) *
                   std::pow((p - 1.0) / (N - p), 1.0 - 1.0 / p) *
                   std::pow(std::exp(std::lgamma(1.0 + 0.5 * N) + std::lgamma(N) -
                                     std::lgamma(N / p) - std::lgamma(1.0 + N - N / p)),
                            1.0 / N);
  return std::pow(c, -p);
}

Field bump_field(const Grid& g) {
  Field u = Field::zeros(g, BoundaryKind::dirichlet_zero);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Point z = g.node_point(i);
    double v = 1.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double t = (z[a] - g.lo[std::size_t(a)]) /
                       (g.hi[std::size_t(a)] - g.lo[std::size_t(a)]);
      v *= 4.0 * t * (1.0 - t);
    }
    u.values[i] = v;
  }
  u.enforce_boundary();
  return u;
}

} // namespace

TEST_CASE("talenti oracle self-check: N=3, p=2 equals 3 (pi/2)^{4/3}") {
  CHECK(talenti_best_constant(3.0, 2.0) ==
        doctest::Approx(3.0 * std::pow(M_PI / 2.0, 4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("compactness threshold arithmetic") {
  const auto q3 = GrushinParams::make(1, 1, 1.0, 2.0); // N_gamma = 3
  CHECK(compactness_threshold(1.0, q3) == doctest::Approx(1.0 / 3.0));
  CHECK(compactness_threshold(4.0, q3) == doctest::Approx(8.0 / 3.0));
  // monotone in S
  double prev = 0.0;
  for (double s : {0.5, 1.0, 2.0, 5.0}) {
    const double t = compactness_threshold(s, q3);
    CHECK(t > prev);
    prev = t;
  }
  CHECK_THROWS_AS(compactness_threshold(0.0, q3), ValidationError);
}

TEST_CASE("nehari scale: closed form, maximality, fibering homogeneity") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0); // p* = 6, p* - p = 4
  const Grid g = build_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {24, 24}, q);
  Field u = bump_field(g);

  // lambda = 0 closed form: t = (E/B)^{1/(p*-p)}; scale u so E = 8, B = 2
  // -> then t must be sqrt(2) once the ratio is 4.
  const double E = dirichlet_p_energy(u, 0.0);
  const double B = lp_pow(u, q.p_star());
  const double t0 = nehari_scale(u, 0.0, 2.0);
  CHECK(t0 == doctest::Approx(std::pow(E / B, 0.25)).epsilon(1e-12));
  // direct arithmetic instance of the same formula
  CHECK(std::pow(8.0 / 2.0, 1.0 / 4.0) == doctest::Approx(std::sqrt(2.0)));

  for (double lambda : {0.0, 0.4}) {
    for (double qexp : {2.0, 3.0, 4.5}) {
      const double ts = nehari_scale(u, lambda, qexp);
      Field v = u;
      for (auto& x : v.values) x *= ts;
      const double jmax = bn_energy(v, lambda, qexp, 0.0).total_J;
      for (int k = 0; k < 50; ++k) {
        const double t = std::exp(uniform(-3.0, 2.5));
        Field w = u;
        for (auto& x : w.values) x *= t;
        CHECK(bn_energy(w, lambda, qexp, 0.0).total_J <= jmax * (1.0 + 1e-10) + 1e-14);
      }
      // scale invariance of the fibering map
      for (double c : {0.5, 3.0}) {
        Field cu = u;
        for (auto& x : cu.values) x *= c;
        CHECK(nehari_scale(cu, lambda, qexp) == doctest::Approx(ts / c).epsilon(1e-9));
      }
    }
  }

  CHECK_THROWS_AS(nehari_scale(Field::zeros(g), 0.0, 2.0), ValidationError);
  CHECK_THROWS_AS(nehari_scale(u, 0.0, 7.0), ValidationError);
  // q = p with lambda above the Rayleigh quotient of u: no fibering root
  const double rayleigh = dirichlet_p_energy(u, 0.0) / lp_pow(u, 2.0);
  CHECK_THROWS_AS(nehari_scale(u, 2.0 * rayleigh, 2.0), SolverError);
}

TEST_CASE("first eigenvalue: separable oracle on (0,pi)^2") {
  const auto q = GrushinParams::make_relaxed(1, 1, 0.0, 2.0); // Euclidean Laplacian
  const Grid g = build_grid({{0.0, M_PI}, {0.0, M_PI}}, {64, 64}, q);
  SolverConfig cfg;
  cfg.grad_tol = 2e-6;
  cfg.max_iters = 300;
  const EigenResult r = first_eigenvalue(DomainMask::whole_interior(g), cfg);
  CHECK(r.value == doctest::Approx(2.0).epsilon(0.03));
  CHECK(lp_norm(r.mode, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : r.mode.values) CHECK(v >= 0.0);
  // descent trace never increases
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].second <= r.trace[k - 1].second * (1.0 + 1e-14));
}

TEST_CASE("first eigenvalue: positivity and domain monotonicity") {
  const auto q = GrushinParams::make_relaxed(1, 1, 0.0, 2.0);
  SolverConfig cfg;
  cfg.grad_tol = 5e-6; // the Armijo decrease floor sits near 1e-6 here
  cfg.max_iters = 300;
  const Grid big = build_grid({{0.0, M_PI}, {0.0, M_PI}}, {48, 48}, q);
  const Grid small = build_grid({{0.0, M_PI / 2.0}, {0.0, M_PI / 2.0}}, {48, 48}, q);
  const double l_big = first_eigenvalue(DomainMask::whole_interior(big), cfg).value;
  const double l_small = first_eigenvalue(DomainMask::whole_interior(small), cfg).value;
  CHECK(l_big > 0.0);
  CHECK(l_small > 0.0);
  CHECK(l_big <= l_small);

  // a genuinely degenerate domain: gamma = 1 box through {x = 0}
  const auto qg = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid gg = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {40, 40}, qg);
  const double l_g = first_eigenvalue(DomainMask::whole_interior(gg), cfg).value;
  CHECK(l_g > 0.0);
}

TEST_CASE("sobolev quotient minimization: Euclidean oracle in 3d") {
  // gamma = 0, m = 2, n = 1, p = 2: best constant from the closed form
  // (coarse version of the full-resolution acceptance protocol)
  const auto q = GrushinParams::make(2, 1, 0.0, 2.0);
  const Grid g = build_grid({{-10.0, 10.0}, {-10.0, 10.0}, {-10.0, 10.0}}, {48, 48, 48}, q);
  SolverConfig cfg;
  cfg.grad_tol = 2e-3;
  cfg.max_iters = 800;

  // a single Dirichlet run overshoots by the boundary-layer cost but obeys
  // the solver contract (descent, nonnegativity, normalization)
  cfg.init_scale = 1.0;
  const QuotientResult r = minimize_sobolev_quotient(g, cfg);
  const double talenti = talenti_best_constant(3.0, 2.0);
  CHECK(r.value > talenti);
  CHECK(r.value < 1.35 * talenti);
  CHECK(lp_norm(r.minimizer, q.p_star()) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].second <= r.trace[k - 1].second * (1.0 + 1e-14));
  for (double v : r.minimizer.values) CHECK(v >= 0.0);

  // the estimation protocol cancels the leading truncation and grid biases
  const BestConstantEstimate est = estimate_sobolev_constant(g, cfg, 0.8, 1.2, true);
  CHECK(est.value == doctest::Approx(talenti).epsilon(0.06));
}

TEST_CASE("critical-point solve: q = p below the first eigenvalue") {
  const auto q = GrushinParams::make(1, 1, 2.0, 2.0); // N_gamma = 4 = p^2
  const Grid g = build_grid({{-3.0, 3.0}, {-6.0, 6.0}}, {48, 64}, q);
  const DomainMask mask = DomainMask::whole_interior(g);
  SolverConfig cfg;
  cfg.grad_tol = 1e-6;
  cfg.max_iters = 500;
  // rough S estimate on the same grid keeps this test self-contained
  SolverConfig scfg = cfg;
  scfg.grad_tol = 1e-4;
  const double s_est = minimize_sobolev_quotient(g, scfg).value;

  SolverConfig ecfg = cfg;
  ecfg.grad_tol = 1e-6;
  const double lambda1 = first_eigenvalue(mask, ecfg).value;
  const double lam = 0.5 * lambda1;
  MountainPassResult r = solve_brezis_nirenberg(mask, lam, 2.0, cfg, s_est);
  CHECK(r.lambda1_estimate > lam);
  CHECK(r.residual <= cfg.grad_tol);
  CHECK(r.nehari_identity_error <= 1e-6);
  CHECK(r.below_threshold == (r.c_lambda < r.threshold));
  CHECK(r.c_lambda > 0.0);
  for (double v : r.solution.values) CHECK(v >= 0.0);

  // mountain-pass geometry along the solution ray: positive barrier, then
  // negative far out
  Field ray = r.solution;
  const double nr = lp_norm(ray, q.p_star());
  for (auto& v : ray.values) v /= nr;
  bool positive_near = false, negative_far = false;
  for (double t : {1e-2, 3e-2, 1e-1}) {
    Field w = ray;
    for (auto& v : w.values) v *= t;
    if (bn_energy(w, lam, 2.0, 0.0).total_J > 0.0) positive_near = true;
  }
  double T = 2.0 * nehari_scale(ray, lam, 2.0);
  for (int k = 0; k < 40 && !negative_far; ++k) {
    Field w = ray;
    for (auto& v : w.values) v *= T;
    negative_far = bn_energy(w, lam, 2.0, 0.0).total_J < 0.0;
    T *= 2.0;
  }
  CHECK(positive_near);
  CHECK(negative_far);

  // validation rejections
  CHECK_THROWS_AS(solve_brezis_nirenberg(mask, 0.0, 2.0, cfg, s_est), ValidationError);
  CHECK_THROWS_AS(solve_brezis_nirenberg(mask, lam, 7.0, cfg, s_est), ValidationError);
  const DomainMask off =
      DomainMask::from_predicate(g, [](const Point& z) { return z[0] > 1.0; });
  CHECK_THROWS_AS(solve_brezis_nirenberg(off, lam, 2.0, cfg, s_est), ValidationError);
}

TEST_CASE("path deformation cross-check stays near the fibered level") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0); // N_gamma = 3
  const Grid g = build_grid({{-3.0, 3.0}, {-3.0, 3.0}}, {40, 40}, q);
  const DomainMask mask = DomainMask::whole_interior(g);
  SolverConfig cfg;
  cfg.grad_tol = 1e-6;
  cfg.max_iters = 500;
  SolverConfig scfg = cfg;
  scfg.grad_tol = 1e-4;
  const double s_est = minimize_sobolev_quotient(g, scfg).value;
  const double lambda = 1.0, qexp = 5.0; // subcritical perturbation regime
  const MountainPassResult r = solve_brezis_nirenberg(mask, lambda, qexp, cfg, s_est);
  const double path_level =
      mountain_pass_level_by_path(mask, lambda, qexp, r.solution, cfg, 17, 150);
  CHECK(path_level >= r.c_lambda * (1.0 - 0.02)); // min-max dominates, up to sampling
  CHECK(path_level <= r.c_lambda * 1.15);         // and the deformation gets close
}
