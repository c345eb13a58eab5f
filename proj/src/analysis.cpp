#include "grushin/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "grushin/geometry.hpp"
#include "grushin/parallel.hpp"

namespace grushin {

namespace {

double pow_abs(double v, double s) {
  const double a = std::abs(v);
  const int si = int(s);
  if (double(si) == s && si >= 1 && si <= 8) {
    double r = a;
    for (int k = 1; k < si; ++k) r *= a;
    return r;
  }
  return std::pow(a, s);
}

// C^2 cutoff profile in the gauge: 1 on [0, R/2], 0 beyond R.
double cutoff(double d, double R) {
  if (d <= 0.5 * R) return 1.0;
  if (d >= R) return 0.0;
  const double t = (d - 0.5 * R) / (0.5 * R);
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double cutoff_derivative(double d, double R) {
  if (d <= 0.5 * R || d >= R) return 0.0;
  const double t = (d - 0.5 * R) / (0.5 * R);
  return -(30.0 * t * t - 60.0 * t * t * t + 30.0 * t * t * t * t) / (0.5 * R);
}

struct LineFit {
  double slope = 0.0, intercept = 0.0, r_squared = 0.0, rss = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0.0;
  const double mean_y = sy / n;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  f.rss = ss_res;
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

} // namespace

DecayFit decay_fit(const Field& u, double r_min, double r_max, int n_annuli,
                   int boundary_margin_cells) {
  if (!(r_min > 0.0 && r_max > r_min)) throw ValidationError("decay_fit: need 0 < r_min < r_max");
  if (n_annuli < 2) throw ValidationError("decay_fit: need at least 2 annuli");
  const Grid& g = u.grid;
  const GrushinParams& q = g.params;
  const double ratio = std::pow(r_max / r_min, 1.0 / n_annuli);

  DecayFit fit;
  fit.annuli.resize(std::size_t(n_annuli));
  for (int k = 0; k < n_annuli; ++k) {
    fit.annuli[std::size_t(k)].r_inner = r_min * std::pow(ratio, k);
    fit.annuli[std::size_t(k)].r_outer = r_min * std::pow(ratio, k + 1);
  }
  std::vector<std::vector<double>> logs{std::size_t(n_annuli)};
  std::vector<std::vector<double>> logds{std::size_t(n_annuli)};

  const std::size_t nn = g.node_count();
  for (std::size_t i = 0; i < nn; ++i) {
    const auto mi = g.node_unflatten(i);
    bool margin_ok = true;
    for (int a = 0; a < g.dim(); ++a) {
      const int idx = mi[std::size_t(a)];
      if (idx < boundary_margin_cells || idx > g.cells[std::size_t(a)] - boundary_margin_cells)
        margin_ok = false;
    }
    if (!margin_ok) continue;
    const double v = u.values[i];
    if (!(v > 0.0)) continue;
    const double d = gauge(q, g.node_point(mi));
    if (d < r_min || d >= r_max) continue;
    int k = int(std::floor(std::log(d / r_min) / std::log(ratio)));
    if (k < 0) k = 0;
    if (k >= n_annuli) k = n_annuli - 1;
    logs[std::size_t(k)].push_back(std::log(v));
    logds[std::size_t(k)].push_back(std::log(d));
  }

  std::vector<double> xs, ys, ys_lower;
  for (int k = 0; k < n_annuli; ++k) {
    auto& ann = fit.annuli[std::size_t(k)];
    auto& lv = logs[std::size_t(k)];
    if (lv.empty())
      throw ValidationError("decay_fit: annulus " + std::to_string(k) +
                            " contains no positive interior nodes");
    double su = 0.0, sd = 0.0;
    for (double l : lv) su += l;
    for (double l : logds[std::size_t(k)]) sd += l;
    ann.mean_log_u = su / double(lv.size());
    ann.mean_log_d = sd / double(lv.size());
    ann.nodes = lv.size();
    std::sort(lv.begin(), lv.end());
    const std::size_t decile = std::max<std::size_t>(1, lv.size() / 10);
    double sl = 0.0;
    for (std::size_t j = 0; j < decile; ++j) sl += lv[j];
    ann.lower_log_u = sl / double(decile);
    xs.push_back(ann.mean_log_d);
    ys.push_back(ann.mean_log_u);
    ys_lower.push_back(ann.lower_log_u);
  }

  const LineFit main = fit_line(xs, ys);
  fit.slope = main.slope;
  fit.intercept = main.intercept;
  fit.r_squared = main.r_squared;
  fit.slope_lower = fit_line(xs, ys_lower).slope;
  return fit;
}

Field build_test_function(const Field& U, double eps, double R_cut, const Grid& target) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("build_test_function: eps in (0, 1]");
  if (!(R_cut > 0.0)) throw ValidationError("build_test_function: R_cut must be > 0");
  const GrushinParams& q = target.params;
  if (eps < 4.0 * target.max_spacing() / R_cut)
    throw ValidationError("build_test_function: eps below the resolution guard "
                          "4 max_spacing / R_cut");
  // B_{R_cut} must fit in the target box: |x| <= R, |y| <= R^{1+gamma}/(1+gamma)
  for (int a = 0; a < target.dim(); ++a) {
    const double reach = a < q.m ? R_cut
                                 : std::pow(R_cut, 1.0 + q.gamma) / (1.0 + q.gamma);
    if (target.lo[std::size_t(a)] > -reach || target.hi[std::size_t(a)] < reach)
      throw ValidationError("build_test_function: B_{R_cut} does not fit in the target box");
  }
  const double kappa = (q.n_gamma() - q.p) / q.p;
  const double amp = std::pow(eps, -kappa);
  Field out = Field::zeros(target, BoundaryKind::dirichlet_zero);
  par::for_each(target.node_count(), [&](std::size_t i) {
    const Point z = target.node_point(i);
    const double d = gauge(q, z);
    const double phi = cutoff(d, R_cut);
    if (phi == 0.0) return;
    const Point arg = dilate(q, 1.0 / eps, z);
    out.values[i] = phi * amp * sample_or_zero(U, arg);
  });
  out.enforce_boundary();
  return out;
}

ExpansionReport expansion_study(const Field& U_in, const std::vector<double>& eps_list,
                                double q, double R_cut) {
  const Grid& g = U_in.grid;
  const GrushinParams& gp = g.params;
  const double p = gp.p;
  const double ps = gp.p_star();
  const double ng = gp.n_gamma();
  if (!(q >= 1.0 && q < ps)) throw ValidationError("expansion_study: q must lie in [1, p_star)");
  if (eps_list.size() < 2) throw ValidationError("expansion_study: need at least 2 epsilons");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1]))
      throw ValidationError("expansion_study: epsilons must be strictly decreasing");

  // normalize the profile: p-energy equal to critical mass
  Field U = U_in;
  {
    const double E = dirichlet_p_energy(U, 0.0);
    const double M = lp_pow(U, ps);
    if (!(E > 0.0 && M > 0.0)) throw ValidationError("expansion_study: degenerate profile");
    const double c = std::pow(E / M, 1.0 / (ps - p));
    par::for_each(U.size(), [&](std::size_t i) { U.values[i] *= c; });
  }

  ExpansionReport rep;
  rep.epsilons = eps_list;
  rep.profile_crit = lp_pow(U, ps);
  const double ng_p2 = ng - p * p;
  rep.case_label = ng_p2 > 1e-12   ? ExpansionCase::Ngamma_gt_p2
                   : ng_p2 < -1e-12 ? ExpansionCase::Ngamma_lt_p2
                                    : ExpansionCase::Ngamma_eq_p2;

  // cell-centered profile data for the pullback quadrature; the reference
  // energy uses the same midpoint rule so that the per-epsilon differences
  // are free of quadrature mismatch
  const GradientField gradU = grushin_gradient(U);
  const std::size_t ncells = g.cell_count();
  const double meas = g.cell_measure();
  rep.profile_energy = par::sum(ncells, [&](std::size_t c) {
    double len2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double comp = gradU.comp[std::size_t(a)][c];
      len2 += comp * comp;
    }
    return meas * (len2 == 0.0 ? 0.0 : std::pow(len2, 0.5 * p));
  });

  for (double eps : eps_list) {
    ExpansionReport::Row row;
    row.eps = eps;
    // gradient column: int |phi(eps d') grad U + eps U chi'(eps d') grad_g d|^p
    row.grad_p_energy = par::sum(ncells, [&](std::size_t c) {
      const auto ci = g.cell_unflatten(c);
      Point zc;
      for (int a = 0; a < g.dim(); ++a)
        zc[a] = g.lo[std::size_t(a)] + g.h[std::size_t(a)] * (ci[std::size_t(a)] + 0.5);
      const double d = gauge(gp, zc);
      const double phi = cutoff(eps * d, R_cut);
      const double dphi = cutoff_derivative(eps * d, R_cut);
      if (phi == 0.0 && dphi == 0.0) return 0.0;
      // cell-centered value of U (corner average)
      const auto st = g.node_strides();
      std::size_t base = 0;
      for (int a = 0; a < g.dim(); ++a)
        base += std::size_t(ci[std::size_t(a)]) * st[std::size_t(a)];
      double uc = 0.0;
      const int corners = 1 << g.dim();
      for (int k = 0; k < corners; ++k) {
        std::size_t idx = base;
        for (int a = 0; a < g.dim(); ++a)
          if (k & (1 << a)) idx += st[std::size_t(a)];
        uc += U.values[idx];
      }
      uc /= double(corners);
      double len2 = 0.0;
      if (dphi != 0.0 && d > 0.0) {
        const Point gd = gauge_gradient(gp, zc);
        for (int a = 0; a < g.dim(); ++a) {
          const double comp = phi * gradU.comp[std::size_t(a)][c] + eps * uc * dphi * gd[a];
          len2 += comp * comp;
        }
      } else {
        for (int a = 0; a < g.dim(); ++a) {
          const double comp = phi * gradU.comp[std::size_t(a)][c];
          len2 += comp * comp;
        }
      }
      return meas * (len2 == 0.0 ? 0.0 : std::pow(len2, 0.5 * p));
    });
    // norm columns: eps^{N - s kappa} int phi^s |U|^s
    auto norm_column = [&](double s) {
      const double kappa = (ng - p) / p;
      const double scale = std::pow(eps, ng - s * kappa);
      const double integral = par::sum(g.node_count(), [&](std::size_t i) {
        const double v = U.values[i];
        if (v == 0.0) return 0.0;
        const auto mi = g.node_unflatten(i);
        const double d = gauge(gp, g.node_point(mi));
        const double phi = cutoff(eps * d, R_cut);
        if (phi == 0.0) return 0.0;
        return g.node_weight(mi) * pow_abs(phi * v, s);
      });
      return scale * integral;
    };
    row.crit_norm_pstar = norm_column(ps);
    row.lower_norm_q = norm_column(q);
    row.norm_p_p = norm_column(p);
    rep.rows.push_back(row);
  }

  // fitted exponents (log-log least squares)
  std::vector<double> lx;
  for (double e : eps_list) lx.push_back(std::log(e));
  auto fit_column = [&](auto&& value) {
    std::vector<double> ly;
    for (const auto& r : rep.rows) {
      const double v = value(r);
      ly.push_back(std::log(std::max(v, 1e-300)));
    }
    return fit_line(lx, ly);
  };
  rep.fitted_grad_exponent =
      fit_column([&](const ExpansionReport::Row& r) {
        return std::max(r.grad_p_energy - rep.profile_energy, 1e-300);
      }).slope;
  rep.fitted_crit_exponent =
      fit_column([&](const ExpansionReport::Row& r) {
        return std::max(rep.profile_crit - r.crit_norm_pstar, 1e-300);
      }).slope;
  rep.fitted_q_exponent =
      fit_column([](const ExpansionReport::Row& r) { return r.lower_norm_q; }).slope;
  const LineFit power = fit_column([](const ExpansionReport::Row& r) { return r.norm_p_p; });
  rep.fitted_p_exponent = power.slope;
  rep.power_fit_rss = power.rss;

  // one-parameter C eps^p |log eps| model against the best pure power
  {
    double mean = 0.0;
    std::vector<double> resid;
    for (const auto& r : rep.rows) {
      const double model = p * std::log(r.eps) + std::log(std::abs(std::log(r.eps)));
      resid.push_back(std::log(r.norm_p_p) - model);
      mean += resid.back();
    }
    mean /= double(resid.size());
    double rss = 0.0;
    for (double v : resid) rss += (v - mean) * (v - mean);
    rep.log_model_rss = rss;
    rep.log_correction_detected = rss <= 0.8 * rep.power_fit_rss;
  }
  return rep;
}

double q_lambda(const Field& u, double lambda) {
  const double ps = u.grid.params.p_star();
  const double denom = std::pow(lp_norm(u, ps), u.grid.params.p);
  if (!(denom > 0.0)) throw ValidationError("q_lambda: zero field");
  return (dirichlet_p_energy(u, 0.0) - lambda * lp_pow(u, u.grid.params.p)) / denom;
}

namespace {

// |u|^{p*} mass inside the gauge ball of radius rho centered at (0, e),
// visiting only nodes inside the ball's bounding box.
double ball_mass(const Field& u, double rho, const std::vector<double>& e) {
  const Grid& g = u.grid;
  const GrushinParams& q = g.params;
  const double ps = q.p_star();
  std::array<int, kMaxDim> lo{}, hi{};
  for (int a = 0; a < g.dim(); ++a) {
    const double reach =
        a < q.m ? rho : std::pow(rho, 1.0 + q.gamma) / (1.0 + q.gamma);
    const double center = a < q.m ? 0.0 : e[std::size_t(a - q.m)];
    const double zmin = std::max(center - reach, g.lo[std::size_t(a)]);
    const double zmax = std::min(center + reach, g.hi[std::size_t(a)]);
    if (zmin > zmax) return 0.0;
    lo[std::size_t(a)] = std::max(0, int(std::floor((zmin - g.lo[std::size_t(a)]) / g.h[std::size_t(a)])));
    hi[std::size_t(a)] = std::min(g.cells[std::size_t(a)],
                                  int(std::ceil((zmax - g.lo[std::size_t(a)]) / g.h[std::size_t(a)])));
  }
  std::size_t count = 1;
  for (int a = 0; a < g.dim(); ++a) count *= std::size_t(hi[std::size_t(a)] - lo[std::size_t(a)] + 1);
  return par::sum(count, [&](std::size_t packed) {
    std::array<int, kMaxDim> mi{};
    std::size_t rest = packed;
    for (int a = g.dim() - 1; a >= 0; --a) {
      const std::size_t span = std::size_t(hi[std::size_t(a)] - lo[std::size_t(a)] + 1);
      mi[std::size_t(a)] = lo[std::size_t(a)] + int(rest % span);
      rest /= span;
    }
    const Point z = g.node_point(mi);
    Point w = Point::zero();
    for (int j = 0; j < q.n; ++j) w[q.m + j] = e[std::size_t(j)];
    if (gauge_dist(q, z, w) >= rho) return 0.0;
    const double v = u.values[g.node_flatten(mi)];
    if (v == 0.0) return 0.0;
    return g.node_weight(mi) * pow_abs(v, ps);
  });
}

std::vector<std::vector<double>> default_center_lattice(const Grid& g) {
  // y-lattice with spacing of two cells per y-axis
  const GrushinParams& q = g.params;
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> axes(std::size_t(q.n));
  for (int j = 0; j < q.n; ++j) {
    const int a = q.m + j;
    for (int i = 0; i <= g.cells[std::size_t(a)]; i += 2)
      axes[std::size_t(j)].push_back(g.lo[std::size_t(a)] + g.h[std::size_t(a)] * i);
  }
  std::vector<std::size_t> idx(std::size_t(q.n), 0);
  while (true) {
    std::vector<double> c(std::size_t(q.n));
    for (int j = 0; j < q.n; ++j) c[std::size_t(j)] = axes[std::size_t(j)][idx[std::size_t(j)]];
    centers.push_back(std::move(c));
    int j = q.n - 1;
    while (j >= 0) {
      if (++idx[std::size_t(j)] < axes[std::size_t(j)].size()) break;
      idx[std::size_t(j)] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return centers;
}

} // namespace

double concentration_function(const Field& u, double rho,
                              const std::vector<std::vector<double>>& centers) {
  if (!(rho > 0.0)) throw ValidationError("concentration_function: rho must be > 0");
  if (rho < u.grid.min_spacing())
    throw ValidationError("concentration_function: rho below the grid spacing (empty ball)");
  if (centers.empty()) throw ValidationError("concentration_function: no centers");
  double best = 0.0;
  for (const auto& e : centers) {
    if (int(e.size()) != u.grid.params.n)
      throw ValidationError("concentration_function: center must be a y-vector of length n");
    best = std::max(best, ball_mass(u, rho, e));
  }
  return best;
}

ConcentrationProfile concentration_profile(const Field& u, const std::vector<double>& rhos) {
  const auto centers = default_center_lattice(u.grid);
  ConcentrationProfile prof;
  const double total = lp_pow(u, u.grid.params.p_star());
  for (double rho : rhos) {
    prof.rhos.push_back(rho);
    prof.q_values.push_back(concentration_function(u, rho, centers));
  }
  // half-mass radius by bisection over the same lattice
  double lo = u.grid.min_spacing() * 1.01, hi = prof.rhos.empty() ? 1.0 : prof.rhos.back();
  while (concentration_function(u, hi, centers) < 0.5 * total) hi *= 2.0;
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (concentration_function(u, mid, centers) < 0.5 * total)
      lo = mid;
    else
      hi = mid;
  }
  prof.half_rho = 0.5 * (lo + hi);
  // argmax center at the half radius
  double best = -1.0;
  for (const auto& e : centers) {
    const double m = ball_mass(u, prof.half_rho, e);
    if (m > best) {
      best = m;
      prof.center = e;
    }
  }
  return prof;
}

ConcentrationNormalization concentration_normalize(const Field& u) {
  const Grid& g = u.grid;
  const double ps = g.params.p_star();
  const double total = lp_pow(u, ps);
  if (std::abs(total - 1.0) > 1e-6)
    throw ValidationError("concentration_normalize: field must satisfy ||u||_{p*} = 1");
  const auto centers = default_center_lattice(g);

  double lo = g.min_spacing() * 1.01;
  double hi = lo;
  while (concentration_function(u, hi, centers) < 0.5) {
    hi *= 2.0;
    if (hi > 1e6) throw SolverError("concentration_normalize: bisection failed (flat mass)");
  }
  for (int k = 0; k < 48; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (concentration_function(u, mid, centers) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  ConcentrationNormalization out;
  out.rho_half = 0.5 * (lo + hi);
  double best = -1.0;
  for (const auto& e : centers) {
    const double m = ball_mass(u, out.rho_half, e);
    if (m > best) {
      best = m;
      out.center = e;
    }
  }
  out.normalized = rescale_field(u, out.center, out.rho_half, g);
  return out;
}

std::vector<double> brezis_lieb_defect(const std::vector<Field>& u_seq, const Field& u_limit,
                                       double s) {
  if (!(s > 1.0)) throw ValidationError("brezis_lieb_defect: s must be > 1");
  std::vector<double> defects;
  const double limit_mass = lp_pow(u_limit, s);
  for (const auto& uk : u_seq) {
    if (!(uk.grid == u_limit.grid))
      throw ValidationError("brezis_lieb_defect: fields must share one grid");
    Field diff = uk;
    par::for_each(diff.size(), [&](std::size_t i) { diff.values[i] -= u_limit.values[i]; });
    defects.push_back(std::abs(lp_pow(uk, s) - lp_pow(diff, s) - limit_mass));
  }
  return defects;
}

double log_gradient_defect(double u_val, double v_val, const std::vector<double>& gu,
                           const std::vector<double>& gv, double p) {
  if (!(u_val > 0.0 && v_val > 0.0))
    throw ValidationError("log_gradient_defect: u and v must be positive");
  if (!(p > 1.0)) throw ValidationError("log_gradient_defect: p must be > 1");
  if (gu.size() != gv.size() || gu.empty())
    throw ValidationError("log_gradient_defect: gradient dimensions must match");
  const std::size_t d = gu.size();
  double nu2 = 0.0, nv2 = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    nu2 += gu[i] * gu[i];
    nv2 += gv[i] * gv[i];
    cross += gu[i] * gv[i];
  }
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  const double r_vu = v_val / u_val, r_uv = u_val / v_val;
  // |gu|^{p-2} gu . [gu - p (v/u)^{p-1} gv - (1-p)(v/u)^p gu] + symmetric;
  // a vanishing gradient contributes nothing (|g|^{p-2} g -> 0 for p > 1)
  const double term1 =
      nu == 0.0 ? 0.0
                : pow_abs(nu, p) - p * std::pow(r_vu, p - 1.0) * pow_abs(nu, p - 2.0) * cross +
                      (p - 1.0) * std::pow(r_vu, p) * pow_abs(nu, p);
  const double term2 =
      nv == 0.0 ? 0.0
                : pow_abs(nv, p) - p * std::pow(r_uv, p - 1.0) * pow_abs(nv, p - 2.0) * cross +
                      (p - 1.0) * std::pow(r_uv, p) * pow_abs(nv, p);
  return term1 + term2;
}

double log_gradient_reference(double u_val, double v_val, const std::vector<double>& gu,
                              const std::vector<double>& gv, double p) {
  if (!(u_val > 0.0 && v_val > 0.0))
    throw ValidationError("log_gradient_reference: u and v must be positive");
  const std::size_t d = gu.size();
  double diff2 = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double a = gu[i] / u_val, b = gv[i] / v_val;
    diff2 += (a - b) * (a - b);
    nu2 += a * a;
    nv2 += b * b;
  }
  const double up = pow_abs(u_val, p), vp = pow_abs(v_val, p);
  if (p >= 2.0) return (up + vp) * pow_abs(std::sqrt(diff2), p);
  const double denom = std::sqrt(nu2) + std::sqrt(nv2);
  if (denom == 0.0) return 0.0;
  return (up + vp) * diff2 / std::pow(denom, 2.0 - p);
}

double talenti_best_constant(double N, double p) {
  if (!(p > 1.0 && p < N)) throw ValidationError("talenti_best_constant: need 1 < p < N");
  const double c = std::pow(M_PI, -0.5) * std::pow(N, -1.0 / p) *
                   std::pow((p - 1.0) / (N - p), 1.0 - 1.0 / p) *
                   std::pow(std::exp(std::lgamma(1.0 + 0.5 * N) + std::lgamma(N) -
                                     std::lgamma(N / p) - std::lgamma(1.0 + N - N / p)),
                            1.0 / N);
  return std::pow(c, -p);
}

} // namespace grushin
