#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "grushin/analysis.hpp"
#include "grushin/geometry.hpp"
#include "grushin/solvers.hpp"

using namespace grushin;

namespace {

std::mt19937_64 rng(90210u);
double uniform(double lo, double hi) { return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53); }

Field power_field(const Grid& g, double beta) {
  // d(z)^{-beta}, clipped near the pole
  Field u = Field::zeros(g, BoundaryKind::free_values);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = gauge(g.params, g.node_point(i));
    u.values[i] = d < 1e-9 ? 0.0 : std::pow(d, -beta);
  }
  return u;
}

} // namespace

TEST_CASE("decay_fit recovers exact power laws within 2%") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid g = build_grid({{-9.0, 9.0}, {-42.0, 42.0}}, {192, 448}, q);
  for (double beta : {0.5, 1.0, 2.0}) {
    const Field u = power_field(g, beta);
    const DecayFit fit = decay_fit(u, 2.0, 8.0, 6);
    CHECK(fit.slope == doctest::Approx(-beta).epsilon(0.02));
    CHECK(fit.r_squared > 0.99);
  }
  // the sampled fundamental profile (p = 2, N_gamma = 3) decays like d^{-1}
  Field gamma_p = Field::zeros(g, BoundaryKind::free_values);
  for (std::size_t i = 0; i < gamma_p.size(); ++i) {
    const Point z = g.node_point(i);
    gamma_p.values[i] = gauge(q, z) < 1e-9 ? 0.0 : fundamental_profile(q, z);
  }
  const DecayFit fit = decay_fit(gamma_p, 2.0, 8.0, 6);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.02));

  CHECK_THROWS_AS(decay_fit(gamma_p, 2.0, 1.0, 4), ValidationError);
  // annulus out of reach -> no interior nodes
  CHECK_THROWS_AS(decay_fit(gamma_p, 500.0, 900.0, 4), ValidationError);
}

TEST_CASE("build_test_function: inner exactness, center value, support") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid src = build_grid({{-12.0, 12.0}, {-24.0, 24.0}}, {128, 192}, q);
  Field U = bubble_profile(src, 1.0);
  const Grid target = build_grid({{-4.0, 4.0}, {-8.0, 8.0}}, {128, 160}, q);
  const double eps = 0.5, R = 3.0;
  const Field ue = build_test_function(U, eps, R, target);
  const double kappa = (q.n_gamma() - q.p) / q.p;
  const double amp = std::pow(eps, -kappa);

  // phi == 1 on B_{R/2}: the test function equals the rescaled profile there
  std::size_t inner = 0;
  for (std::size_t i = 0; i < ue.size(); ++i) {
    const Point z = target.node_point(i);
    const double d = gauge(q, z);
    if (d < 0.5 * R * 0.98 && !target.is_boundary(target.node_unflatten(i))) {
      const double expect = amp * sample_or_zero(U, dilate(q, 1.0 / eps, z));
      CHECK(ue.values[i] == doctest::Approx(expect).epsilon(1e-12));
      ++inner;
    }
    if (d >= R) CHECK(ue.values[i] == 0.0);
  }
  CHECK(inner > 100);

  // value at the origin
  Point zero = Point::zero();
  CHECK(sample(ue, zero) == doctest::Approx(amp * sample(U, zero)).epsilon(1e-9));

  // resolution guard
  CHECK_THROWS_AS(build_test_function(U, 0.01, R, target), ValidationError);
  // cutoff ball must fit
  const Grid tiny = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {16, 16}, q);
  CHECK_THROWS_AS(build_test_function(U, 0.5, 3.0, tiny), ValidationError);
}

TEST_CASE("q_lambda: definition and linearity in lambda") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid g = build_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {32, 32}, q);
  Field u = bubble_profile(g, 0.8);
  const double q0 = q_lambda(u, 0.0);
  CHECK(q0 == doctest::Approx(dirichlet_p_energy(u, 0.0) /
                              std::pow(lp_norm(u, q.p_star()), 2.0)));
  const double slope = -lp_pow(u, 2.0) / std::pow(lp_norm(u, q.p_star()), 2.0);
  for (double lam : {0.3, 1.0, 2.5})
    CHECK(q_lambda(u, lam) == doctest::Approx(q0 + slope * lam).epsilon(1e-12));
}

TEST_CASE("concentration function: monotone with the right limits") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid g = build_grid({{-6.0, 6.0}, {-9.0, 9.0}}, {96, 128}, q);
  Field u = bubble_profile(g, 1.0);
  const double nrm = lp_norm(u, q.p_star());
  for (auto& v : u.values) v /= nrm;
  const std::vector<std::vector<double>> centers = {{0.0}, {1.0}, {-1.5}};
  double prev = 0.0;
  for (double rho : {0.4, 0.8, 1.6, 3.2}) {
    const double qv = concentration_function(u, rho, centers);
    CHECK(qv >= prev);
    prev = qv;
  }
  // large ball captures (almost) everything
  CHECK(concentration_function(u, 40.0, centers) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(concentration_function(u, 1e-9, centers), ValidationError);
}

TEST_CASE("concentration_normalize pins half the critical mass in the unit ball") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid g = build_grid({{-8.0, 8.0}, {-12.0, 12.0}}, {160, 192}, q);
  Field u = bubble_profile(g, 1.3);
  const double nrm = lp_norm(u, q.p_star());
  for (auto& v : u.values) v /= nrm;

  const ConcentrationNormalization cn = concentration_normalize(u);
  CHECK(cn.rho_half > 0.0);
  const std::vector<std::vector<double>> origin = {{0.0}};
  const double mass =
      concentration_function(cn.normalized, 1.0, origin) / lp_pow(cn.normalized, q.p_star());
  CHECK(mass == doctest::Approx(0.5).epsilon(0.02));

  // idempotence up to interpolation tolerance
  Field v = cn.normalized;
  const double nv = lp_norm(v, q.p_star());
  for (auto& x : v.values) x /= nv;
  const ConcentrationNormalization cn2 = concentration_normalize(v);
  CHECK(cn2.rho_half == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(cn2.center[0]) <= 2.0 * g.h[1]);
}

TEST_CASE("brezis-lieb defect: exact zero cases and shrinking bubbles") {
  const auto q = GrushinParams::make(1, 1, 0.0, 1.5); // p* = 6
  const Grid g = build_grid({{-6.0, 6.0}, {-6.0, 6.0}}, {512, 512}, q);
  const double s = q.p_star();

  Field limit = Field::zeros(g);
  for (std::size_t i = 0; i < limit.size(); ++i) {
    const Point z = g.node_point(i);
    const double r2 = z[0] * z[0] + z[1] * z[1];
    limit.values[i] = std::exp(-0.5 * r2);
  }
  limit.enforce_boundary();

  // u_limit = 0: defects vanish identically
  {
    std::vector<Field> seq{limit, limit};
    const auto d0 = brezis_lieb_defect(seq, Field::zeros(g), s);
    for (double v : d0) CHECK(v == 0.0);
  }
  // u_k = u_limit: middle term vanishes, defect 0
  {
    std::vector<Field> seq{limit};
    const auto d1 = brezis_lieb_defect(seq, limit, s);
    CHECK(d1[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  // shrinking concentrating bumps: defects strictly decreasing
  Field bubble = Field::zeros(g);
  for (std::size_t i = 0; i < bubble.size(); ++i) {
    const Point z = g.node_point(i);
    bubble.values[i] = 0.008 * std::exp(-2.0 * (z[0] * z[0] + z[1] * z[1]));
  }
  bubble.enforce_boundary();
  std::vector<Field> seq;
  for (int k = 0; k <= 4; ++k) {
    const Field bk = rescale_field(bubble, {0.0}, std::pow(2.0, k), g);
    Field uk = limit;
    for (std::size_t i = 0; i < uk.size(); ++i) uk.values[i] += bk.values[i];
    seq.push_back(std::move(uk));
  }
  const auto defects = brezis_lieb_defect(seq, limit, s);
  for (std::size_t k = 1; k < defects.size(); ++k) CHECK(defects[k] < defects[k - 1]);
  CHECK(defects.back() <= 1e-3 * lp_pow(limit, s));

  const Grid other = build_grid({{-6.0, 6.0}, {-6.0, 6.0}}, {256, 256}, q);
  std::vector<Field> bad{Field::zeros(other)};
  CHECK_THROWS_AS(brezis_lieb_defect(bad, limit, s), ValidationError);
}

TEST_CASE("log-gradient inequality: zero set and positivity") {
  for (double p : {1.5, 2.0, 3.0}) {
    // proportional log-gradients annihilate the defect
    for (int k = 0; k < 200; ++k) {
      const double u = std::exp(uniform(-2.0, 2.0));
      const double v = std::exp(uniform(-2.0, 2.0));
      std::vector<double> gu = {uniform(-2.0, 2.0), uniform(-2.0, 2.0)};
      std::vector<double> gv = {gu[0] * v / u, gu[1] * v / u};
      const double d = log_gradient_defect(u, v, gu, gv, p);
      // cancellation noise scales with the term magnitudes
      const double m1 = std::pow(std::hypot(gu[0], gu[1]), p) *
                        (1.0 + p * std::pow(v / u, p));
      const double m2 = std::pow(std::hypot(gv[0], gv[1]), p) *
                        (1.0 + p * std::pow(u / v, p));
      CHECK(std::abs(d) <= 1e-13 * (m1 + m2) + 1e-14);
    }
    // u = v, gu = gv
    std::vector<double> gg = {0.3, -0.7};
    CHECK(log_gradient_defect(1.7, 1.7, gg, gg, p) == doctest::Approx(0.0).epsilon(1e-14));

    // random samples: nonnegative and dominating a positive multiple of the
    // reference quantity
    double cmin = 1e300;
    for (int k = 0; k < 10000; ++k) {
      const double u = std::exp(uniform(-1.5, 1.5));
      const double v = std::exp(uniform(-1.5, 1.5));
      std::vector<double> gu = {uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
      std::vector<double> gv = {uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
      const double d = log_gradient_defect(u, v, gu, gv, p);
      CHECK(d >= -1e-12);
      const double ref = log_gradient_reference(u, v, gu, gv, p);
      if (ref > 1e-12) cmin = std::min(cmin, d / ref);
    }
    CHECK(cmin > 0.0);
    if (p == 2.0) CHECK(cmin == doctest::Approx(1.0).epsilon(1e-9)); // exact identity
  }
  std::vector<double> g1 = {1.0}, g2 = {2.0};
  CHECK_THROWS_AS(log_gradient_defect(-1.0, 1.0, g1, g2, 2.0), ValidationError);
  CHECK_THROWS_AS(log_gradient_defect(1.0, 0.0, g1, g2, 2.0), ValidationError);
}

TEST_CASE("expansion study: columns, invariances, case labels") {
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0); // N_gamma = 3 < p^2
  const Grid g = build_grid({{-16.0, 16.0}, {-128.0, 128.0}}, {192, 768}, q);
  const Field U = bubble_profile(g, 1.0);
  const std::vector<double> eps = {0.4, 0.28, 0.2, 0.14, 0.1};
  const ExpansionReport rep = expansion_study(U, eps, 2.0, 3.0);

  CHECK(rep.case_label == ExpansionCase::Ngamma_lt_p2);
  REQUIRE(rep.rows.size() == eps.size());
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    CHECK(rep.rows[k].grad_p_energy > 0.0);
    CHECK(rep.rows[k].crit_norm_pstar > 0.0);
    CHECK(rep.rows[k].norm_p_p > 0.0);
    if (k) CHECK(rep.rows[k].norm_p_p < rep.rows[k - 1].norm_p_p);
  }
  // N_gamma < p^2: ||u_eps||_p^p scales like eps^{(N_gamma-p)/(p-1)} = eps^1
  CHECK(rep.fitted_p_exponent == doctest::Approx(1.0).epsilon(0.2));
  // the gradient energy stays within C eps^alpha of the profile energy:
  // the deviation shrinks at least at the decay rate (the cutoff cost and
  // the removed tail can nearly cancel, so only the envelope is stable)
  const double alpha = q.decay_alpha();
  // upper bound of the first estimate: the cutoff can only add C eps^alpha
  // above the profile energy (the removed tail pushes the other way)
  for (const auto& r : rep.rows) {
    const double excess = r.grad_p_energy - rep.profile_energy;
    CHECK(excess <= 0.5 * rep.profile_energy * std::pow(r.eps, alpha));
  }
  // critical mass approaches the profile mass at rate >= N_gamma/(p-1) - 0.3
  CHECK(rep.fitted_crit_exponent >= q.n_gamma() / (q.p - 1.0) - 0.3);

  CHECK_THROWS_AS(expansion_study(U, {0.4, 0.4}, 2.0, 3.0), ValidationError);
  CHECK_THROWS_AS(expansion_study(U, eps, 7.0, 3.0), ValidationError);
}
