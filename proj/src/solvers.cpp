#include "grushin/solvers.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

#include "grushin/geometry.hpp"
#include "grushin/parallel.hpp"

#include <cstdio>
#include <cstdlib>

namespace { bool debug_enabled() { static bool e = std::getenv("GRUSHIN_DEBUG") != nullptr; return e; } }

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

void apply_mask(Field& f, const DomainMask* mask) {
  if (!mask) return;
  par::for_each(f.size(), [&](std::size_t i) {
    if (!mask->inside[i]) f.values[i] = 0.0;
  });
}

void take_abs(Field& f) {
  par::for_each(f.size(), [&](std::size_t i) { f.values[i] = std::abs(f.values[i]); });
}


void scale_field(Field& f, double c) {
  par::for_each(f.size(), [&](std::size_t i) { f.values[i] *= c; });
}

double max_abs_value(const Field& f) {
  return par::max_value(f.size(), [&](std::size_t i) { return std::abs(f.values[i]); });
}

Field axpy(const Field& x, double t, const Field& y) { // x + t y
  Field r = x;
  par::for_each(r.size(), [&](std::size_t i) { r.values[i] += t * y.values[i]; });
  return r;
}

// Project a direction onto the tangent space of {||u||_s = const} at u by
// removing its component along the ray of u. The ray is a flat direction of
// every scale-invariant objective here, but leaving it in the step lets the
// normalization denominator collapse during line search.
void project_to_sphere_tangent(Field& dir, const Field& u, double s) {
  const Grid& g = u.grid;
  const double num = par::sum(u.size(), [&](std::size_t i) {
    const double v = u.values[i];
    if (v == 0.0) return 0.0;
    const double w = g.node_weight(g.node_unflatten(i));
    return w * std::copysign(pow_abs(v, s - 1.0), v) * dir.values[i];
  });
  const double den = par::sum(u.size(), [&](std::size_t i) {
    const double v = u.values[i];
    if (v == 0.0) return 0.0;
    const double w = g.node_weight(g.node_unflatten(i));
    return w * pow_abs(v, s);
  });
  if (!(den > 0.0)) return;
  const double c = num / den;
  par::for_each(dir.size(), [&](std::size_t i) { dir.values[i] -= c * u.values[i]; });
}

// Diagonally preconditioned CG on K d = g restricted to the free (interior,
// in-mask) nodes, where K is the supplied SPD metric action (mass added by
// the caller's functor). Deterministic: capped iterations, deterministic
// tolerance test, pairwise-reduced inner products.
template <class Op, class Pre>
Field metric_solve(const Field& g, Op&& K_apply, Pre&& precond, const DomainMask* mask,
                   int iters, double rel_tol) {
  const BoundaryKind bk = g.boundary;
  Field x = Field::zeros(g.grid, bk);
  Field r = g;
  apply_mask(r, mask);
  Field z = Field::zeros(g.grid, bk);
  precond(r, z);
  apply_mask(z, mask);
  Field p = z;
  double rz = dot(r, z);
  if (!(rz > 0.0)) return r; // zero or degenerate right-hand side
  const double stop = rel_tol * rel_tol * rz;
  for (int k = 0; k < iters; ++k) {
    Field ap = K_apply(p);
    apply_mask(ap, mask);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    par::for_each(x.size(), [&](std::size_t i) {
      x.values[i] += alpha * p.values[i];
      r.values[i] -= alpha * ap.values[i];
    });
    precond(r, z);
    apply_mask(z, mask);
    const double rz_new = dot(r, z);
    if (!(rz_new > stop)) break;
    const double beta = rz_new / rz;
    rz = rz_new;
    par::for_each(p.size(), [&](std::size_t i) {
      p.values[i] = z.values[i] + beta * p.values[i];
    });
  }
  return x;
}

// Half-mass gauge radius of |v|^{p*} about the origin: the concentration
// scale of a field. Used to pin the dilation gauge and to report collapse.
double half_mass_radius(const Field& v) {
  const Grid& g = v.grid;
  const double ps = g.params.p_star();
  const double total = lp_pow(v, ps);
  if (!(total > 0.0)) return 0.0;
  double lo = 0.25 * g.min_spacing(), hi = 0.0;
  for (int a = 0; a < g.dim(); ++a)
    hi = std::max(hi, std::max(std::abs(g.lo[std::size_t(a)]), std::abs(g.hi[std::size_t(a)])));
  auto mass_in = [&](double rho) {
    return par::sum(g.node_count(), [&](std::size_t i) {
      const auto mi = g.node_unflatten(i);
      const Point z = g.node_point(mi);
      if (gauge(g.params, z) >= rho) return 0.0;
      return g.node_weight(mi) * pow_abs(v.values[i], ps);
    });
  };
  for (int k = 0; k < 30; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mass_in(mid) < 0.5 * total)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Shared quotient descent: minimize E_delta(u) / ||u||_s^p over nonnegative
// Dirichlet fields with unit target norm. Armijo backtracking; iterates taken
// in modulus; optional H^1_gamma preconditioning; optional y-recentering.
// On scale-invariant problems (free-space best constant) the concentration
// gauge is pinned by a smooth penalty on the d-moment radius of the |u|^{p*}
// mass, the numerical analog of the concentration normalization that fixes
// rho along minimizing sequences; without it the discrete critical quotient
// slides down the dilation valley to a mesh-scale capacity spike whose value
// is a lattice constant unrelated to the best constant.
// ---------------------------------------------------------------------------

struct QuotientSetup {
  double s = 0.0;               // denominator exponent
  const DomainMask* mask = nullptr;
  bool recenter = false;
  bool gauge_fix_dilation = false; // scale-invariant problem: pin the gauge
  double gauge_sigma0 = 0.0;       // pinned concentration radius (d-moment)
  double gauge_beta = 0.0;         // penalty stiffness
};

// Mean gauge radius of the |u|^s mass: sigma = int d |u|^s w / int |u|^s w.
// Scales like 1/rho under the dilation family, so it pins the gauge.
double moment_radius(const Field& u, double s) {
  const Grid& g = u.grid;
  double m0 = 0.0, m1 = 0.0;
  m0 = par::sum(g.node_count(), [&](std::size_t i) {
    return g.node_weight(g.node_unflatten(i)) * pow_abs(u.values[i], s);
  });
  m1 = par::sum(g.node_count(), [&](std::size_t i) {
    const auto mi = g.node_unflatten(i);
    return g.node_weight(mi) * pow_abs(u.values[i], s) *
           gauge(g.params, g.node_point(mi));
  });
  return m0 > 0.0 ? m1 / m0 : 0.0;
}

// Dual vector of grad(log sigma) at u: s w |u|^{s-2} u (d - sigma)/(sigma M0).
Field gauge_log_gradient(const Field& u, double s) {
  const Grid& g = u.grid;
  Field v = Field::zeros(g, BoundaryKind::free_values);
  const double m0 = par::sum(g.node_count(), [&](std::size_t i) {
    return g.node_weight(g.node_unflatten(i)) * pow_abs(u.values[i], s);
  });
  if (!(m0 > 0.0)) return v;
  const double sigma = moment_radius(u, s);
  if (!(sigma > 0.0)) return v;
  const double coef = s / (sigma * m0);
  par::for_each(g.node_count(), [&](std::size_t i) {
    const double val = u.values[i];
    if (val == 0.0) return;
    const auto mi = g.node_unflatten(i);
    const double d = gauge(g.params, g.node_point(mi));
    v.values[i] = coef * g.node_weight(mi) *
                  std::copysign(pow_abs(val, s - 1.0), val) * (d - sigma);
  });
  return v;
}

// Gauge penalty beta (log sigma(u) - log sigma0)^2 of a normalized field.
double gauge_penalty(const Field& u, const QuotientSetup& qs) {
  if (!qs.gauge_fix_dilation) return 0.0;
  const double sigma = moment_radius(u, qs.s);
  if (!(sigma > 0.0)) return 0.0;
  const double d = std::log(sigma / qs.gauge_sigma0);
  return qs.gauge_beta * d * d;
}

struct QuotientOutcome {
  Field minimizer;
  double value = 0.0; // delta = 0 quotient of the minimizer
  int iters = 0;
  double residual = 0.0;
  std::vector<std::pair<int, double>> trace;
};

Field quotient_gradient(const Field& u, double delta, const QuotientSetup& qs) {
  // KKT residual of E_delta + gauge penalty on the unit ||.||_s sphere at a
  // normalized u: G - mu grad(||u||_s^s)/s with mu = <G, u>/s. For delta = 0
  // and no penalty the multiplier reduces to p E(u) by homogeneity.
  const Grid& g = u.grid;
  const double p = g.params.p;
  Field grad = p_laplacian_apply(u, delta); // d(E/p)/du
  grad.boundary = u.boundary;
  par::for_each(grad.size(), [&](std::size_t i) { grad.values[i] *= p; });

  if (qs.gauge_fix_dilation && qs.gauge_beta > 0.0) {
    // penalty gradient: 2 beta log(sigma/sigma0) grad(log sigma)
    const double sigma = moment_radius(u, qs.s);
    if (sigma > 0.0) {
      const Field v = gauge_log_gradient(u, qs.s);
      const double coef = 2.0 * qs.gauge_beta * std::log(sigma / qs.gauge_sigma0);
      par::for_each(grad.size(), [&](std::size_t i) {
        grad.values[i] += coef * v.values[i];
      });
    }
  }

  const double mu = dot(grad, u) / qs.s; // constraint multiplier
  par::for_each(grad.size(), [&](std::size_t i) {
    const double v = u.values[i];
    if (v == 0.0) return;
    const double w = g.node_weight(g.node_unflatten(i));
    grad.values[i] -= mu * qs.s * w * std::copysign(pow_abs(v, qs.s - 1.0), v);
  });
  Field out = std::move(grad);
  apply_mask(out, qs.mask);
  if (u.boundary == BoundaryKind::dirichlet_zero) {
    par::for_each(out.size(), [&](std::size_t i) {
      if (g.is_boundary(g.node_unflatten(i))) out.values[i] = 0.0;
    });
  }
  return out;
}

// y-axis recentering by whole cells: moves the |u|^s mass median back to the
// box center. Applied only when it does not increase the objective.
bool recenter_y(Field& u, double s) {
  const Grid& g = u.grid;
  const auto st = g.node_strides();
  bool shifted = false;
  for (int a = g.params.m; a < g.dim(); ++a) {
    const int np = g.npts(a);
    std::vector<double> slice(std::size_t(np), 0.0);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const auto mi = g.node_unflatten(i);
      slice[std::size_t(mi[std::size_t(a)])] +=
          g.node_weight(mi) * pow_abs(u.values[i], s);
    }
    double total = 0.0;
    for (double v : slice) total += v;
    if (total <= 0.0) continue;
    double acc = 0.0;
    int med = np / 2;
    for (int j = 0; j < np; ++j) {
      acc += slice[std::size_t(j)];
      if (acc >= 0.5 * total) {
        med = j;
        break;
      }
    }
    const int shift = med - g.cells[std::size_t(a)] / 2;
    if (shift == 0) continue;
    Field moved = Field::zeros(g, u.boundary);
    par::for_each(g.node_count(), [&](std::size_t i) {
      auto mi = g.node_unflatten(i);
      mi[std::size_t(a)] += shift;
      if (mi[std::size_t(a)] < 0 || mi[std::size_t(a)] > g.cells[std::size_t(a)]) return;
      std::size_t src = 0;
      for (int b = 0; b < g.dim(); ++b) src += std::size_t(mi[std::size_t(b)]) * st[std::size_t(b)];
      moved.values[i] = u.values[src];
    });
    moved.enforce_boundary();
    u = std::move(moved);
    shifted = true;
  }
  return shifted;
}

QuotientOutcome quotient_descent(Field u0, const QuotientSetup& qs_in,
                                 const SolverConfig& cfg) {
  const Grid& g = u0.grid;

  take_abs(u0);
  apply_mask(u0, qs_in.mask);
  u0.enforce_boundary();
  const double n0 = lp_norm(u0, qs_in.s);
  if (!(n0 > 0.0)) throw SolverError("quotient descent: zero initial field");
  scale_field(u0, 1.0 / n0);

  const double delta = cfg.delta_reg * max_abs_value(u0) / g.min_spacing();
  const bool lagged = cfg.precondition && g.params.p != 2.0;
  const LineMetric lm_fixed = (cfg.precondition && !lagged)
                                  ? build_line_metric(g, nullptr, 0.0)
                                  : LineMetric{};

  Field u = std::move(u0);

  // gauge state: pin the concentration radius of scale-invariant problems
  QuotientSetup qs = qs_in;
  if (qs.gauge_fix_dilation) {
    qs.gauge_sigma0 = moment_radius(u, qs.s);
    if (!(qs.gauge_sigma0 > 0.0)) qs.gauge_fix_dilation = false;
  }
  double value = dirichlet_p_energy(u, delta);
  if (qs.gauge_fix_dilation) qs.gauge_beta = cfg.gauge_beta * std::max(value, 1e-30);
  auto objective = [&](const Field& w) {
    return dirichlet_p_energy(w, delta) + gauge_penalty(w, qs);
  };
  value += gauge_penalty(u, qs); // penalty vanishes at the pinned radius

  double t_prev = cfg.step_init;
  QuotientOutcome out;
  out.trace.reserve(std::size_t(cfg.max_iters) + 1);

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    out.trace.emplace_back(iter, value);
    Field grad = quotient_gradient(u, delta, qs);
    out.residual = residual_norm(grad);
    if (out.residual <= cfg.grad_tol) break;

    Field dir = grad;
    if (cfg.precondition) {
      auto K_apply = [&](const Field& x) {
        Field ap = lagged ? frozen_stiffness_apply(u, x, delta) : stiffness_apply(x);
        par::for_each(ap.size(), [&](std::size_t i) {
          ap.values[i] += g.node_weight(g.node_unflatten(i)) * x.values[i];
        });
        return ap;
      };
      const LineMetric lm_it = lagged ? build_line_metric(g, &u, delta) : LineMetric{};
      const LineMetric& lm = lagged ? lm_it : lm_fixed;
      auto precond = [&](const Field& rr, Field& zz) { lm.apply(rr, zz); };
      dir = metric_solve(grad, K_apply, precond, qs.mask, cfg.cg_iters, cfg.cg_tol);
      if (qs.gauge_fix_dilation && qs.gauge_beta > 0.0) {
        // the penalty adds a rank-one 2 beta vv^T to the Hessian that the
        // stiffness metric cannot see; fold it in by Sherman-Morrison
        Field v = gauge_log_gradient(u, qs.s);
        v.boundary = grad.boundary;
        Field kv = metric_solve(v, K_apply, precond, qs.mask, cfg.cg_iters, cfg.cg_tol);
        const double twob = 2.0 * qs.gauge_beta;
        const double denom = 1.0 + twob * dot(v, kv);
        if (denom > 0.0) {
          const double coef = twob * dot(v, dir) / denom;
          par::for_each(dir.size(), [&](std::size_t i) {
            dir.values[i] -= coef * kv.values[i];
          });
        }
      }
    }
    project_to_sphere_tangent(dir, u, qs.s);
    double m = dot(grad, dir);
    if (!(m > 0.0)) {
      dir = grad;
      project_to_sphere_tangent(dir, u, qs.s);
      m = dot(grad, dir);
      if (!(m > 0.0)) { dir = grad; m = dot(grad, grad); }
    }

    auto evaluate = [&](double t, Field& w_out) -> double {
      Field w = axpy(u, -t, dir);
      apply_mask(w, qs.mask);
      w.enforce_boundary();
      const double nw = lp_norm(w, qs.s);
      if (!(nw > 0.0)) return std::numeric_limits<double>::infinity();
      scale_field(w, 1.0 / nw);
      const double trial = objective(w);
      w_out = std::move(w);
      return trial;
    };

    double t = std::min(cfg.step_init, 4.0 * t_prev);
    bool accepted = false;
    Field w_acc;
    double f_acc = value;
    while (t > 1e-16 * cfg.step_init) {
      Field w;
      const double trial = evaluate(t, w);
      if (trial <= value - cfg.armijo_c * t * m) {
        w_acc = std::move(w);
        f_acc = trial;
        accepted = true;
        break;
      }
      t *= cfg.armijo_shrink;
    }
    if (accepted) {
      // one quadratic-model refinement: the first Armijo-acceptable step can
      // sit near the undamped top of the preconditioned spectrum
      const double drop = value - f_acc;
      const double curv = m * t - drop;
      if (curv > 0.0) {
        const double tq = std::clamp(0.5 * m * t * t / curv, 0.05 * t, 4.0 * t);
        if (std::abs(tq - t) > 0.05 * t) {
          Field wq;
          const double fq = evaluate(tq, wq);
          if (fq < f_acc) {
            w_acc = std::move(wq);
            f_acc = fq;
            t = tq;
          }
        }
      }
      u = std::move(w_acc);
      value = f_acc;
    }
    if (debug_enabled())
      std::fprintf(stderr, "[qd] it=%d F=%.12f res=%.3e m=%.3e t=%.3e acc=%d\n", iter, value,
                   out.residual, m, t, int(accepted));
    if (!accepted)
      throw SolverError("quotient descent: line search failed at residual " +
                            std::to_string(out.residual),
                        out.trace);
    t_prev = t;

    if (qs.recenter && cfg.recenter_every > 0 && (iter + 1) % cfg.recenter_every == 0) {
      Field candidate = u;
      if (recenter_y(candidate, qs.s)) {
        const double ncand = lp_norm(candidate, qs.s);
        if (ncand > 0.0) {
          scale_field(candidate, 1.0 / ncand);
          const double vcand = objective(candidate);
          if (vcand <= value) { // never let the shift raise the objective
            u = std::move(candidate);
            value = vcand;
          }
        }
      }
    }
  }

  if (iter == cfg.max_iters) {
    Field grad = quotient_gradient(u, delta, qs);
    out.residual = residual_norm(grad);
    if (out.residual > cfg.grad_tol)
      throw SolverError("quotient descent: no convergence in " +
                            std::to_string(cfg.max_iters) + " iterations (residual " +
                            std::to_string(out.residual) + ")",
                        out.trace);
  }

  if (qs.gauge_fix_dilation) {
    const double sigma = moment_radius(u, qs.s);
    if (sigma < 1.0 * g.max_spacing())
      throw SolverError("quotient descent: iterate concentrated to the mesh scale "
                        "(moment radius " +
                            std::to_string(sigma) +
                            "); refine the grid or increase init_scale",
                        out.trace);
  }

  // enforce nonnegativity exactly (cannot raise the quotient), then
  // normalize and report the unregularized value and residual
  take_abs(u);
  const double nf = lp_norm(u, qs.s);
  scale_field(u, 1.0 / nf);
  out.value = dirichlet_p_energy(u, 0.0);
  {
    Field grad = quotient_gradient(u, 0.0, qs);
    out.residual = residual_norm(grad);
  }
  out.minimizer = std::move(u);
  out.iters = iter;
  return out;
}

std::vector<Grid> coarsening_ladder(const Grid& fine, double min_feature) {
  std::vector<Grid> ladder{fine}; // fine -> coarse
  Grid g = fine;
  while (true) {
    int mincells = g.cells[0];
    for (int a = 1; a < g.dim(); ++a) mincells = std::min(mincells, g.cells[std::size_t(a)]);
    if (mincells < 48) break;
    Grid c = g;
    for (int a = 0; a < g.dim(); ++a) {
      c.cells[std::size_t(a)] = g.cells[std::size_t(a)] / 2;
      c.h[std::size_t(a)] =
          (c.hi[std::size_t(a)] - c.lo[std::size_t(a)]) / c.cells[std::size_t(a)];
    }
    // never coarsen past the point where the solution's core is resolved
    if (min_feature > 0.0 && c.max_spacing() > 1.0 * min_feature) break;
    ladder.push_back(c);
    g = c;
  }
  return ladder;
}

bool is_whole_interior(const DomainMask& mask) {
  std::size_t interior = 1;
  for (int a = 0; a < mask.grid.dim(); ++a)
    interior *= std::size_t(mask.grid.cells[std::size_t(a)] - 1);
  return mask.inside_count() == interior;
}

Field resample(const Field& src, const Grid& target) {
  return rescale_field(src, std::vector<double>(std::size_t(target.params.n), 0.0), 1.0,
                       target);
}

} // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw ValidationError("grad_tol must be > 0");
  if (!(step_init > 0.0)) throw ValidationError("step_init must be > 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ValidationError("armijo_c must be in (0,1)");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0))
    throw ValidationError("armijo_shrink must be in (0,1)");
  if (!(delta_reg >= 0.0)) throw ValidationError("delta_reg must be >= 0");
  if (cg_iters < 1) throw ValidationError("cg_iters must be >= 1");
  if (!(init_scale > 0.0)) throw ValidationError("init_scale must be > 0");
}

Field bubble_profile(const Grid& grid, double scale, bool dirichlet) {
  const GrushinParams& q = grid.params;
  const double expo = (q.n_gamma() - q.p) / q.p;
  const double inner = q.p / (q.p - 1.0);
  Field u = Field::zeros(grid, dirichlet ? BoundaryKind::dirichlet_zero
                                         : BoundaryKind::free_values);
  par::for_each(grid.node_count(), [&](std::size_t i) {
    const Point z = grid.node_point(i);
    const Point zs = dilate(q, 1.0 / scale, z);
    const double d = gauge(q, zs);
    double v = std::pow(1.0 + std::pow(d, inner), -expo);
    if (dirichlet) {
      // smooth taper to zero over the outer 10% of the box
      for (int a = 0; a < grid.dim(); ++a) {
        const double widths = grid.hi[std::size_t(a)] - grid.lo[std::size_t(a)];
        const double t = (z[a] - grid.lo[std::size_t(a)]) / widths;
        const double edge = std::min(t, 1.0 - t) / 0.1;
        if (edge < 1.0) {
          const double e = std::max(edge, 0.0);
          v *= e * e * (3.0 - 2.0 * e);
        }
      }
    }
    u.values[i] = v;
  });
  u.enforce_boundary();
  return u;
}

QuotientResult minimize_sobolev_quotient(const Grid& grid, const SolverConfig& config) {
  config.validate();
  const GrushinParams& q = grid.params;
  const double ps = q.p_star(); // validates p < N_gamma

  QuotientSetup qs;
  qs.s = ps;
  qs.recenter = true;
  qs.gauge_fix_dilation = true;

  const std::vector<Grid> ladder = config.multilevel
                                       ? coarsening_ladder(grid, config.init_scale)
                                       : std::vector<Grid>{grid};

  QuotientOutcome out;
  if (config.natural_boundary) {
    // Natural-boundary relaxation, restricted to the reflection-symmetric
    // subspace: computed on the positive orthant anchored at the origin
    // (where the bubble is stable against translation drift) and scaled by
    // 2^{dim (1 - p/p*)} back to the full-space quotient.
    Grid oct = grid;
    for (int a = 0; a < grid.dim(); ++a) {
      const double mid = 0.5 * (grid.lo[std::size_t(a)] + grid.hi[std::size_t(a)]);
      oct.lo[std::size_t(a)] = mid;
      oct.cells[std::size_t(a)] = std::max(4, grid.cells[std::size_t(a)] / 2);
      oct.h[std::size_t(a)] = (oct.hi[std::size_t(a)] - oct.lo[std::size_t(a)]) /
                              oct.cells[std::size_t(a)];
    }
    QuotientSetup qn = qs;
    qn.recenter = false;
    const std::vector<Grid> lad = config.multilevel
                                      ? coarsening_ladder(oct, config.init_scale)
                                      : std::vector<Grid>{oct};
    Field init;
    for (auto it = lad.rbegin(); it != lad.rend(); ++it) {
      init = (it == lad.rbegin()) ? bubble_profile(*it, config.init_scale, false)
                                  : resample(out.minimizer, *it);
      init.boundary = BoundaryKind::free_values;
      out = quotient_descent(std::move(init), qn, config);
    }
    const double fold = std::pow(2.0, grid.dim() * (1.0 - q.p / ps));
    out.value *= fold;
    // unfold the orthant minimizer onto the requested grid by reflection
    Field full = Field::zeros(grid, BoundaryKind::free_values);
    par::for_each(grid.node_count(), [&](std::size_t i) {
      const Point z = grid.node_point(i);
      Point zz;
      for (int a = 0; a < grid.dim(); ++a) {
        const double mid = 0.5 * (grid.lo[std::size_t(a)] + grid.hi[std::size_t(a)]);
        zz[a] = mid + std::abs(z[a] - mid);
      }
      full.values[i] = sample_or_zero(out.minimizer, zz);
    });
    const double nf = lp_norm(full, ps);
    if (nf > 0.0) scale_field(full, 1.0 / nf);
    out.minimizer = std::move(full);
  } else {
    Field init;
    for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
      init = (it == ladder.rbegin()) ? bubble_profile(*it, config.init_scale, true)
                                     : resample(out.minimizer, *it);
      out = quotient_descent(std::move(init), qs, config);
    }
  }

  QuotientResult res;
  res.value = out.value;
  res.minimizer = std::move(out.minimizer);
  res.iters = out.iters;
  res.residual = out.residual;
  res.trace = std::move(out.trace);
  res.boundary_mass = boundary_mass_fraction(res.minimizer, ps, 0.1);
  res.boundary_mass_warning = res.boundary_mass > 1e-3;
  return res;
}

BestConstantEstimate estimate_sobolev_constant(const Grid& grid, const SolverConfig& config,
                                               double scale_lo, double scale_hi,
                                               bool richardson) {
  if (!(scale_lo > 0.0 && scale_hi > scale_lo))
    throw ValidationError("estimate_sobolev_constant: need 0 < scale_lo < scale_hi");
  BestConstantEstimate est;
  auto extrapolate = [&](const Grid& g) {
    SolverConfig cfg = config;
    cfg.init_scale = scale_lo;
    const double qlo = minimize_sobolev_quotient(g, cfg).value;
    est.runs.emplace_back(scale_lo, qlo);
    cfg.init_scale = scale_hi;
    const double qhi = minimize_sobolev_quotient(g, cfg).value;
    est.runs.emplace_back(scale_hi, qhi);
    const double slope = (qhi - qlo) / (scale_hi - scale_lo);
    return qlo - scale_lo * slope;
  };
  est.fine_extrapolated = extrapolate(grid);
  est.value = est.fine_extrapolated;
  if (richardson) {
    Grid coarse = grid;
    for (int a = 0; a < grid.dim(); ++a) {
      int c = (2 * grid.cells[std::size_t(a)]) / 3;
      if (c % 2) ++c;
      coarse.cells[std::size_t(a)] = std::max(8, c);
      coarse.h[std::size_t(a)] = (coarse.hi[std::size_t(a)] - coarse.lo[std::size_t(a)]) /
                                 coarse.cells[std::size_t(a)];
    }
    est.coarse_extrapolated = extrapolate(coarse);
    const double r2 = (coarse.h[0] * coarse.h[0]) / (grid.h[0] * grid.h[0]);
    est.value = est.fine_extrapolated +
                (est.fine_extrapolated - est.coarse_extrapolated) / (r2 - 1.0);
  }
  return est;
}

EigenResult first_eigenvalue(const DomainMask& mask, const SolverConfig& config) {
  config.validate();
  if (mask.inside_count() == 0) throw ValidationError("first_eigenvalue: empty mask");
  const Grid& grid = mask.grid;

  QuotientSetup qs;
  qs.s = grid.params.p;
  qs.mask = &mask;
  qs.recenter = false;

  // product bump over the box as the initial mode
  auto bump = [](const Grid& g) {
    Field u = Field::zeros(g, BoundaryKind::dirichlet_zero);
    par::for_each(g.node_count(), [&](std::size_t i) {
      const Point z = g.node_point(i);
      double v = 1.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double t = (z[a] - g.lo[std::size_t(a)]) /
                         (g.hi[std::size_t(a)] - g.lo[std::size_t(a)]);
        v *= 4.0 * t * (1.0 - t);
      }
      u.values[i] = v;
    });
    u.enforce_boundary();
    return u;
  };

  QuotientOutcome out;
  if (config.multilevel && is_whole_interior(mask)) {
    const std::vector<Grid> ladder = coarsening_ladder(grid, 0.0);
    for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
      const DomainMask level_mask = DomainMask::whole_interior(*it);
      QuotientSetup level_qs = qs;
      level_qs.mask = &level_mask;
      Field init =
          (it == ladder.rbegin()) ? bump(*it) : resample(out.minimizer, *it);
      out = quotient_descent(std::move(init), level_qs, config);
    }
  } else {
    out = quotient_descent(bump(grid), qs, config);
  }

  EigenResult res;
  res.value = out.value;
  res.mode = std::move(out.minimizer);
  res.iters = out.iters;
  res.residual = out.residual;
  res.trace = std::move(out.trace);
  return res;
}

double nehari_scale(const Field& u, double lambda, double q) {
  const GrushinParams& gp = u.grid.params;
  const double p = gp.p;
  const double ps = gp.p_star();
  if (!(q >= p && q < ps)) throw ValidationError("nehari_scale: q must lie in [p, p_star)");
  const double E = dirichlet_p_energy(u, 0.0);
  const double B = lp_pow(u, ps);
  if (!(B > 0.0)) throw ValidationError("nehari_scale: zero field");

  if (lambda == 0.0) return std::pow(E / B, 1.0 / (ps - p));
  const double A = lp_pow(u, q);
  if (q == p) {
    const double num = E - lambda * A;
    if (!(num > 0.0))
      throw SolverError("nehari_scale: no positive fibering root (Rayleigh quotient <= lambda)");
    return std::pow(num / B, 1.0 / (ps - p));
  }

  // phi(t) = E - lambda A t^{q-p} - B t^{ps-p}, strictly decreasing
  auto phi = [&](double t) {
    return E - lambda * A * std::pow(t, q - p) - B * std::pow(t, ps - p);
  };
  auto dphi = [&](double t) {
    return -lambda * A * (q - p) * std::pow(t, q - p - 1.0) -
           B * (ps - p) * std::pow(t, ps - p - 1.0);
  };
  double hi = std::pow(E / B, 1.0 / (ps - p));
  double lo = std::min(std::pow(E / (2.0 * lambda * A), 1.0 / (q - p)),
                       std::pow(E / (2.0 * B), 1.0 / (ps - p)));
  if (lo > hi) lo = 0.5 * hi;
  double t = 0.5 * (lo + hi);
  for (int k = 0; k < 100; ++k) {
    const double f = phi(t);
    if (f > 0.0)
      lo = t;
    else
      hi = t;
    const double step = f / dphi(t);
    double tn = t - step;
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (std::abs(tn - t) <= 1e-15 * t) {
      t = tn;
      break;
    }
    t = tn;
  }
  return t;
}

double compactness_threshold(double s_estimate, const GrushinParams& params) {
  if (!(s_estimate > 0.0)) throw ValidationError("compactness_threshold: S must be > 0");
  const double ng = params.n_gamma();
  return std::pow(s_estimate, ng / params.p) / ng;
}

MountainPassResult solve_brezis_nirenberg(const DomainMask& mask, double lambda, double q,
                                          const SolverConfig& config, double s_estimate) {
  config.validate();
  const Grid& grid = mask.grid;
  const GrushinParams& gp = grid.params;
  const double p = gp.p;
  const double ps = gp.p_star();
  if (!mask.intersects_degeneration)
    throw ValidationError("solve_brezis_nirenberg: the domain must intersect {x = 0}");
  if (!(q >= p && q < ps))
    throw ValidationError("solve_brezis_nirenberg: q must lie in [p, p_star)");
  if (!(lambda > 0.0)) throw ValidationError("solve_brezis_nirenberg: lambda must be > 0");

  MountainPassResult res;

  if (q == p) {
    SolverConfig eigcfg = config;
    eigcfg.grad_tol = std::max(config.grad_tol, 1e-8);
    const EigenResult eig = first_eigenvalue(mask, eigcfg);
    res.lambda1_estimate = eig.value;
    if (!(lambda < eig.value))
      throw ValidationError("solve_brezis_nirenberg: q = p requires lambda < lambda_1 (got " +
                            std::to_string(lambda) + " >= " + std::to_string(eig.value) + ")");
  }

  if (s_estimate > 0.0) {
    res.s_estimate = s_estimate;
  } else {
    const QuotientResult sq = minimize_sobolev_quotient(grid, config);
    res.s_estimate = sq.value;
  }
  res.threshold = compactness_threshold(res.s_estimate, gp);

  const double delta = config.delta_reg / grid.min_spacing();

  // start on the fibered ray of the bubble profile
  Field v = bubble_profile(grid, config.init_scale);
  apply_mask(v, &mask);
  v.enforce_boundary();
  {
    const double nv = lp_norm(v, ps);
    if (!(nv > 0.0)) throw SolverError("solve_brezis_nirenberg: empty initial field");
    scale_field(v, 1.0 / nv);
    const double t0 = nehari_scale(v, lambda, q);
    scale_field(v, t0);
    res.nehari_t = t0;
  }

  const bool lagged = config.precondition && gp.p != 2.0;
  const LineMetric lm_fixed = (config.precondition && !lagged)
                                  ? build_line_metric(grid, nullptr, 0.0)
                                  : LineMetric{};
  double phi = bn_energy(v, lambda, q, delta).total_J;
  double t_prev = config.step_init;

  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    res.trace.emplace_back(iter, phi);
    Field g = weak_residual_bn(v, lambda, q, delta, &mask);
    res.residual = residual_norm(g);
    if (res.residual <= config.grad_tol) break;

    Field dir = g;
    if (config.precondition) {
      auto K_apply = [&](const Field& x) {
        Field ap = lagged ? frozen_stiffness_apply(v, x, delta) : stiffness_apply(x);
        par::for_each(ap.size(), [&](std::size_t i) {
          ap.values[i] += grid.node_weight(grid.node_unflatten(i)) * x.values[i];
        });
        return ap;
      };
      const LineMetric lm_it = lagged ? build_line_metric(grid, &v, delta) : LineMetric{};
      const LineMetric& lm = lagged ? lm_it : lm_fixed;
      dir = metric_solve(
          g, K_apply, [&](const Field& rr, Field& zz) { lm.apply(rr, zz); }, &mask,
          config.cg_iters, config.cg_tol);
    }
    project_to_sphere_tangent(dir, v, ps);
    double m = dot(g, dir);
    if (!(m > 0.0)) {
      dir = g;
      project_to_sphere_tangent(dir, v, ps);
      m = dot(g, dir);
      if (!(m > 0.0)) { dir = g; m = dot(g, g); }
    }

    auto evaluate = [&](double t, Field& w_out, double& tstar_out) -> double {
      Field w = axpy(v, -t, dir);
      apply_mask(w, &mask);
      w.enforce_boundary();
      double tstar = 0.0;
      try {
        tstar = nehari_scale(w, lambda, q);
      } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
      }
      scale_field(w, tstar);
      const double trial = bn_energy(w, lambda, q, delta).total_J;
      w_out = std::move(w);
      tstar_out = tstar;
      return trial;
    };

    double t = std::min(config.step_init, 4.0 * t_prev);
    bool accepted = false;
    Field w_acc;
    double f_acc = phi, tstar_acc = 1.0;
    while (t > 1e-16 * config.step_init) {
      Field w;
      double tstar = 0.0;
      const double trial = evaluate(t, w, tstar);
      if (trial <= phi - config.armijo_c * t * m) {
        w_acc = std::move(w);
        f_acc = trial;
        tstar_acc = tstar;
        accepted = true;
        break;
      }
      t *= config.armijo_shrink;
    }
    if (accepted) {
      const double drop = phi - f_acc;
      const double curv = m * t - drop;
      if (curv > 0.0) {
        const double tq = std::clamp(0.5 * m * t * t / curv, 0.05 * t, 4.0 * t);
        if (std::abs(tq - t) > 0.05 * t) {
          Field wq;
          double tstar_q = 1.0;
          const double fq = evaluate(tq, wq, tstar_q);
          if (fq < f_acc) {
            w_acc = std::move(wq);
            f_acc = fq;
            tstar_acc = tstar_q;
            t = tq;
          }
        }
      }
      v = std::move(w_acc);
      phi = f_acc;
      res.nehari_t = tstar_acc;
    }
    if (!accepted) {
      const double rho = half_mass_radius(v);
      throw SolverError(
          "solve_brezis_nirenberg: line search failed (residual " +
              std::to_string(res.residual) + ", concentration radius " + std::to_string(rho) +
              "); the iterate may be collapsing to zero or concentrating",
          res.trace);
    }
    t_prev = t;
  }

  if (iter == config.max_iters && res.residual > config.grad_tol) {
    const double rho = half_mass_radius(v);
    throw SolverError("solve_brezis_nirenberg: no convergence in " +
                          std::to_string(config.max_iters) + " iterations (residual " +
                          std::to_string(res.residual) + ", concentration radius " +
                          std::to_string(rho) + ")",
                      res.trace);
  }

  take_abs(v); // the limit is nonnegative; folds only roundoff undershoot here
  const EnergyBreakdown fin = bn_energy(v, lambda, q, 0.0);
  res.c_lambda = fin.total_J;
  res.below_threshold = res.c_lambda < res.threshold;
  {
    const Field g0 = weak_residual_bn(v, lambda, q, 0.0, &mask);
    res.residual = residual_norm(g0);
  }
  const double lhs = fin.dirichlet_p;
  const double rhs = lambda * fin.lower_order_q + fin.critical_term;
  res.nehari_identity_error = std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
  res.solution = std::move(v);
  res.iters = iter;
  return res;
}

double mountain_pass_level_by_path(const DomainMask& mask, double lambda, double q,
                                   const Field& direction, const SolverConfig& config,
                                   int path_points, int sweeps) {
  config.validate();
  if (path_points < 5) throw ValidationError("mountain_pass_level_by_path: need >= 5 points");
  const Grid& grid = mask.grid;
  const double delta = config.delta_reg / grid.min_spacing();

  Field dir = direction;
  take_abs(dir);
  apply_mask(dir, &mask);
  dir.enforce_boundary();
  const double nd = lp_norm(dir, grid.params.p_star());
  if (!(nd > 0.0)) throw ValidationError("mountain_pass_level_by_path: zero direction");
  scale_field(dir, 1.0 / nd);

  // far endpoint with negative energy
  double T = 2.0 * nehari_scale(dir, lambda, q);
  for (int k = 0; k < 60; ++k) {
    Field far = dir;
    scale_field(far, T);
    if (bn_energy(far, lambda, q, delta).total_J < 0.0) break;
    T *= 2.0;
  }

  // concentrate half the samples below twice the fibering maximum so the
  // barrier top is resolved, then continue linearly out to the far endpoint
  const double tbar = nehari_scale(dir, lambda, q);
  std::vector<double> knots;
  const int inner = path_points / 2;
  for (int k = 0; k < inner; ++k)
    knots.push_back(2.0 * tbar * double(k) / double(inner));
  for (int k = 0; k <= path_points - inner - 1; ++k)
    knots.push_back(2.0 * tbar +
                    (T - 2.0 * tbar) * double(k) / double(path_points - inner - 1));
  std::vector<Field> path;
  path.reserve(knots.size());
  for (double tk : knots) {
    Field pk = dir;
    scale_field(pk, tk);
    path.push_back(std::move(pk));
  }

  const LineMetric lm_path =
      config.precondition ? build_line_metric(grid, nullptr, 0.0) : LineMetric{};
  auto K_plain = [&](const Field& x) {
    Field ap = stiffness_apply(x);
    par::for_each(ap.size(), [&](std::size_t i) {
      ap.values[i] += grid.node_weight(grid.node_unflatten(i)) * x.values[i];
    });
    return ap;
  };
  auto energy_of = [&](const Field& f) { return bn_energy(f, lambda, q, delta).total_J; };

  std::vector<double> J(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) J[k] = energy_of(path[k]);

  auto l2dist = [&](const Field& a, const Field& b) {
    return std::sqrt(par::sum(a.size(), [&](std::size_t i) {
      const double w = grid.node_weight(grid.node_unflatten(i));
      const double d = a.values[i] - b.values[i];
      return w * d * d;
    }));
  };
  // equal-arclength resampling of the piecewise-linear path; keeps the chain
  // connected while individual points descend
  auto reparametrize = [&]() {
    const std::size_t K = path.size();
    std::vector<double> cum(K, 0.0);
    for (std::size_t k = 1; k < K; ++k) cum[k] = cum[k - 1] + l2dist(path[k], path[k - 1]);
    if (!(cum[K - 1] > 0.0)) return;
    std::vector<Field> fresh;
    fresh.reserve(K);
    fresh.push_back(path.front());
    std::size_t seg = 0;
    for (std::size_t j = 1; j + 1 < K; ++j) {
      const double target = cum[K - 1] * double(j) / double(K - 1);
      while (seg + 2 < K && cum[seg + 1] < target) ++seg;
      const double len = cum[seg + 1] - cum[seg];
      const double theta = len > 0.0 ? (target - cum[seg]) / len : 0.0;
      Field w = path[seg];
      par::for_each(w.size(), [&](std::size_t i) {
        w.values[i] += theta * (path[seg + 1].values[i] - path[seg].values[i]);
      });
      fresh.push_back(std::move(w));
    }
    fresh.push_back(path.back());
    path = std::move(fresh);
    for (std::size_t k = 0; k < K; ++k) J[k] = energy_of(path[k]);
  };

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    std::size_t top = 1;
    for (std::size_t k = 2; k + 1 < path.size(); ++k)
      if (J[k] > J[top]) top = k;
    Field g = weak_residual_bn(path[top], lambda, q, delta, &mask);
    Field d = config.precondition
                  ? metric_solve(
                        g, K_plain, [&](const Field& rr, Field& zz) { lm_path.apply(rr, zz); },
                        &mask, config.cg_iters, config.cg_tol)
                  : g;
    const double m = dot(g, d);
    if (!(m > 0.0)) break;
    // cap the move at a fraction of the local segment length so the
    // deformation stays a small perturbation of a connected path
    const double seg_len = std::min(l2dist(path[top], path[top - 1]),
                                    l2dist(path[top], path[top + 1]));
    const double dlen = std::sqrt(par::sum(d.size(), [&](std::size_t i) {
      const double w = grid.node_weight(grid.node_unflatten(i));
      return w * d.values[i] * d.values[i];
    }));
    double t = config.step_init;
    if (dlen > 0.0) t = std::min(t, 0.5 * seg_len / dlen);
    bool moved = false;
    while (t > 1e-12 * config.step_init) {
      Field w = axpy(path[top], -t, d);
      apply_mask(w, &mask);
      w.enforce_boundary();
      const double jw = energy_of(w);
      if (jw <= J[top] - config.armijo_c * t * m) {
        path[top] = std::move(w);
        J[top] = jw;
        moved = true;
        break;
      }
      t *= config.armijo_shrink;
    }
    if (!moved) break;
    if ((sweep + 1) % 8 == 0) reparametrize();
  }

  // the barrier top can fall between samples; estimate the level on a
  // subdivided sampling of the final polygonal path
  double level = J[0];
  for (double j : J) level = std::max(level, j);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    for (double theta : {0.25, 0.5, 0.75}) {
      Field w = path[k];
      par::for_each(w.size(), [&](std::size_t i) {
        w.values[i] += theta * (path[k + 1].values[i] - path[k].values[i]);
      });
      level = std::max(level, energy_of(w));
    }
  }
  return level;
}

} // namespace grushin
