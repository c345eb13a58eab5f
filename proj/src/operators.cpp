#include "grushin/operators.hpp"

#include <cmath>

#include "grushin/parallel.hpp"

namespace grushin {

namespace {

// |v|^s with cheap integer fast paths (s = 1..8 exact).
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

struct CellGeometry {
  int dim = 0;
  int m = 0;
  double gamma = 0.0;
  int corners = 1;
  std::array<std::size_t, 16> corner_off{}; // node-index offset of each corner
  std::array<std::size_t, kMaxDim> node_stride{};
  std::array<std::size_t, kMaxDim> cell_stride{};
  std::array<double, kMaxDim> h{};
  std::array<double, kMaxDim> inv_h{};
  double corner_weight = 0.0; // cell measure / 2^dim

  explicit CellGeometry(const Grid& g) {
    dim = g.dim();
    m = g.params.m;
    gamma = g.params.gamma;
    corners = 1 << dim;
    node_stride = g.node_strides();
    cell_stride = g.cell_strides();
    for (int a = 0; a < dim; ++a) {
      h[std::size_t(a)] = g.h[std::size_t(a)];
      inv_h[std::size_t(a)] = 1.0 / g.h[std::size_t(a)];
    }
    for (int k = 0; k < corners; ++k) {
      std::size_t off = 0;
      for (int a = 0; a < dim; ++a)
        if (k & (1 << a)) off += node_stride[std::size_t(a)];
      corner_off[std::size_t(k)] = off;
    }
    corner_weight = g.cell_measure() / double(corners);
  }
};

// |x_c|^gamma at the center of the cell with multi-index ci.
double center_weight(const Grid& g, const std::array<int, kMaxDim>& ci) {
  if (g.params.gamma == 0.0) return 1.0;
  double xs = 0.0;
  for (int a = 0; a < g.params.m; ++a) {
    const double x = g.lo[std::size_t(a)] + g.h[std::size_t(a)] * (ci[std::size_t(a)] + 0.5);
    xs += x * x;
  }
  return std::pow(xs, 0.5 * g.params.gamma);
}

std::size_t cell_base_node(const CellGeometry& geo, const std::array<int, kMaxDim>& ci) {
  std::size_t idx = 0;
  for (int a = 0; a < geo.dim; ++a)
    idx += std::size_t(ci[std::size_t(a)]) * geo.node_stride[std::size_t(a)];
  return idx;
}

// One-sided edge differences of u on a cell. edge_diff[a][k] is the
// difference along axis a at the edge through corner k; corners sharing an
// edge carry the same value.
void cell_edge_diffs(const CellGeometry& geo, const double* u, std::size_t base,
                     double diff[kMaxDim][16]) {
  for (int a = 0; a < geo.dim; ++a) {
    const int bit = 1 << a;
    for (int k = 0; k < geo.corners; ++k) {
      if (k & bit) continue;
      const double lo = u[base + geo.corner_off[std::size_t(k)]];
      const double hi = u[base + geo.corner_off[std::size_t(k | bit)]];
      const double d = (hi - lo) * geo.inv_h[std::size_t(a)];
      diff[a][k] = d;
      diff[a][k | bit] = d;
    }
  }
}

// Squared weighted gradient sample at each corner.
void cell_corner_lensq(const CellGeometry& geo, double wy, const double diff[kMaxDim][16],
                       double lensq[16]) {
  const double wy2 = wy * wy;
  for (int k = 0; k < geo.corners; ++k) {
    double s = 0.0;
    for (int a = 0; a < geo.m; ++a) s += diff[a][k] * diff[a][k];
    for (int a = geo.m; a < geo.dim; ++a) s += wy2 * diff[a][k] * diff[a][k];
    lensq[k] = s;
  }
}

// Iterate cells of one parity color. Same-color cells share no nodes, so the
// body may scatter to nodal accumulators without races.
template <class Body>
void for_cells_of_color(const Grid& g, int color, Body&& body) {
  const int d = g.dim();
  std::array<int, kMaxDim> count{};
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) {
    const int b = (color >> a) & 1;
    const int c = (g.cells[std::size_t(a)] - b + 1) / 2; // cells with index = b mod 2
    if (c <= 0) return;
    count[std::size_t(a)] = c;
    total *= std::size_t(c);
  }
  par::for_each(total, [&](std::size_t packed) {
    std::array<int, kMaxDim> ci{};
    std::size_t rest = packed;
    for (int a = d - 1; a >= 0; --a) {
      const int c = count[std::size_t(a)];
      ci[std::size_t(a)] = 2 * int(rest % std::size_t(c)) + ((color >> a) & 1);
      rest /= std::size_t(c);
    }
    body(ci);
  });
}

// The shared flux kernel: accumulates d(E/p)/du into r, where E is the
// corner-quadrature energy with exponent p and regularization delta.
void accumulate_flux(const Field& u, double p, double delta, Field& r) {
  const Grid& g = u.grid;
  const CellGeometry geo(g);
  const double d2 = delta * delta;
  const bool linear = (p == 2.0);
  const int ncolors = 1 << geo.dim;
  for (int color = 0; color < ncolors; ++color) {
    for_cells_of_color(g, color, [&](const std::array<int, kMaxDim>& ci) {
      double diff[kMaxDim][16];
      double lensq[16];
      double s[16];
      const std::size_t base = cell_base_node(geo, ci);
      cell_edge_diffs(geo, u.values.data(), base, diff);
      const double wy = center_weight(g, ci);
      if (linear && d2 == 0.0) {
        for (int k = 0; k < geo.corners; ++k) s[k] = 1.0;
      } else {
        cell_corner_lensq(geo, wy, diff, lensq);
        const double e = 0.5 * p - 1.0;
        for (int k = 0; k < geo.corners; ++k) {
          const double t = lensq[k] + d2;
          s[k] = t == 0.0 ? 0.0 : (linear ? 1.0 : std::pow(t, e));
        }
      }
      const double wy2 = wy * wy;
      for (int a = 0; a < geo.dim; ++a) {
        const int bit = 1 << a;
        const double wa2 = a < geo.m ? 1.0 : wy2;
        const double scale = geo.corner_weight * wa2 * geo.inv_h[std::size_t(a)];
        for (int k = 0; k < geo.corners; ++k) {
          if (k & bit) continue;
          const double flux = scale * diff[a][k] * (s[k] + s[k | bit]);
          if (flux == 0.0) continue;
          r.values[base + geo.corner_off[std::size_t(k | bit)]] += flux;
          r.values[base + geo.corner_off[std::size_t(k)]] -= flux;
        }
      }
    });
  }
}

void zero_fixed_rows(Field& r, const Field& u, const DomainMask* mask) {
  const Grid& g = r.grid;
  if (u.boundary != BoundaryKind::dirichlet_zero && mask == nullptr) return;
  par::for_each(g.node_count(), [&](std::size_t i) {
    if (mask && !mask->inside[i]) {
      r.values[i] = 0.0;
      return;
    }
    if (u.boundary == BoundaryKind::dirichlet_zero && g.is_boundary(g.node_unflatten(i)))
      r.values[i] = 0.0;
  });
}

} // namespace

GradientField grushin_gradient(const Field& u) {
  const Grid& g = u.grid;
  const CellGeometry geo(g);
  GradientField out;
  out.grid = g;
  for (int a = 0; a < geo.dim; ++a) out.comp[std::size_t(a)].assign(g.cell_count(), 0.0);
  const double inv_corners = 1.0 / double(geo.corners);
  par::for_each(g.cell_count(), [&](std::size_t c) {
    const auto ci = g.cell_unflatten(c);
    double diff[kMaxDim][16];
    cell_edge_diffs(geo, u.values.data(), cell_base_node(geo, ci), diff);
    const double wy = center_weight(g, ci);
    for (int a = 0; a < geo.dim; ++a) {
      double mean = 0.0;
      for (int k = 0; k < geo.corners; ++k) mean += diff[a][k];
      mean *= inv_corners;
      out.comp[std::size_t(a)][c] = a < geo.m ? mean : wy * mean;
    }
  });
  return out;
}

double dirichlet_p_energy(const Field& u, double delta) {
  if (!(delta >= 0.0)) throw ValidationError("dirichlet_p_energy: delta must be >= 0");
  const Grid& g = u.grid;
  const CellGeometry geo(g);
  const double d2 = delta * delta;
  const double p = g.params.p;
  const bool linear = (p == 2.0);
  return par::sum(g.cell_count(), [&](std::size_t c) {
    const auto ci = g.cell_unflatten(c);
    double diff[kMaxDim][16];
    double lensq[16];
    cell_edge_diffs(geo, u.values.data(), cell_base_node(geo, ci), diff);
    cell_corner_lensq(geo, center_weight(g, ci), diff, lensq);
    double acc = 0.0;
    if (linear) {
      for (int k = 0; k < geo.corners; ++k) acc += lensq[k] + d2;
    } else {
      for (int k = 0; k < geo.corners; ++k) {
        const double t = lensq[k] + d2;
        acc += t == 0.0 ? 0.0 : std::pow(t, 0.5 * p);
      }
    }
    return acc * geo.corner_weight;
  });
}

Field p_laplacian_apply(const Field& u, double delta) {
  if (!(delta >= 0.0)) throw ValidationError("p_laplacian_apply: delta must be >= 0");
  Field r = Field::zeros(u.grid, BoundaryKind::free_values);
  accumulate_flux(u, u.grid.params.p, delta, r);
  zero_fixed_rows(r, u, nullptr);
  return r;
}

EnergyBreakdown bn_energy(const Field& u, double lambda, double q, double delta) {
  const GrushinParams& gp = u.grid.params;
  const double ps = gp.p_star();
  if (!(q >= gp.p && q < ps))
    throw ValidationError("bn_energy: q must lie in [p, p_star)");
  if (u.boundary != BoundaryKind::dirichlet_zero)
    throw ValidationError("bn_energy: field must be dirichlet_zero");
  EnergyBreakdown b;
  b.lambda = lambda;
  b.q = q;
  b.dirichlet_p = dirichlet_p_energy(u, delta);
  b.lower_order_q = lp_pow(u, q);
  b.critical_term = lp_pow(u, ps);
  b.total_J = b.dirichlet_p / gp.p - lambda * b.lower_order_q / q - b.critical_term / ps;
  return b;
}

Field weak_residual_bn(const Field& u, double lambda, double q, double delta,
                       const DomainMask* mask) {
  const GrushinParams& gp = u.grid.params;
  const double ps = gp.p_star();
  if (!(q >= gp.p && q < ps))
    throw ValidationError("weak_residual_bn: q must lie in [p, p_star)");
  Field r = Field::zeros(u.grid, BoundaryKind::free_values);
  accumulate_flux(u, gp.p, delta, r);
  const Grid& g = u.grid;
  par::for_each(g.node_count(), [&](std::size_t i) {
    const double v = u.values[i];
    if (v == 0.0) return;
    const double w = g.node_weight(g.node_unflatten(i));
    const double sgn = v > 0.0 ? 1.0 : -1.0;
    r.values[i] -= w * sgn * (lambda * pow_abs(v, q - 1.0) + pow_abs(v, ps - 1.0));
  });
  zero_fixed_rows(r, u, mask);
  return r;
}

Field stiffness_apply(const Field& u) {
  Field r = Field::zeros(u.grid, BoundaryKind::free_values);
  accumulate_flux(u, 2.0, 0.0, r);
  zero_fixed_rows(r, u, nullptr);
  return r;
}

namespace {

// Per-corner coefficient (|grad_g state|^2 + delta^2)^{(p-2)/2} of one cell.
void frozen_corner_coeffs(const Grid& g, const CellGeometry& geo, const Field& state,
                          const std::array<int, kMaxDim>& ci, double delta, double s[16]) {
  const double p = g.params.p;
  const double d2 = delta * delta;
  if (p == 2.0 && d2 == 0.0) {
    for (int k = 0; k < geo.corners; ++k) s[k] = 1.0;
    return;
  }
  double diff[kMaxDim][16];
  double lensq[16];
  cell_edge_diffs(geo, state.values.data(), cell_base_node(geo, ci), diff);
  cell_corner_lensq(geo, center_weight(g, ci), diff, lensq);
  const double e = 0.5 * p - 1.0;
  for (int k = 0; k < geo.corners; ++k) {
    const double t = lensq[k] + d2;
    s[k] = t == 0.0 ? 0.0 : (p == 2.0 ? 1.0 : std::pow(t, e));
  }
}

} // namespace

Field frozen_stiffness_apply(const Field& state, const Field& input, double delta) {
  const Grid& g = input.grid;
  const CellGeometry geo(g);
  Field r = Field::zeros(g, BoundaryKind::free_values);
  const int ncolors = 1 << geo.dim;
  for (int color = 0; color < ncolors; ++color) {
    for_cells_of_color(g, color, [&](const std::array<int, kMaxDim>& ci) {
      double s[16];
      frozen_corner_coeffs(g, geo, state, ci, delta, s);
      double diff[kMaxDim][16];
      const std::size_t base = cell_base_node(geo, ci);
      cell_edge_diffs(geo, input.values.data(), base, diff);
      const double wy = center_weight(g, ci);
      const double wy2 = wy * wy;
      for (int a = 0; a < geo.dim; ++a) {
        const int bit = 1 << a;
        const double wa2 = a < geo.m ? 1.0 : wy2;
        const double scale = geo.corner_weight * wa2 * geo.inv_h[std::size_t(a)];
        for (int k = 0; k < geo.corners; ++k) {
          if (k & bit) continue;
          const double flux = scale * diff[a][k] * (s[k] + s[k | bit]);
          if (flux == 0.0) continue;
          r.values[base + geo.corner_off[std::size_t(k | bit)]] += flux;
          r.values[base + geo.corner_off[std::size_t(k)]] -= flux;
        }
      }
    });
  }
  zero_fixed_rows(r, input, nullptr);
  return r;
}

std::vector<double> frozen_metric_diagonal(const Field& state, double delta) {
  const Grid& g = state.grid;
  const CellGeometry geo(g);
  std::vector<double> diag(g.node_count(), 0.0);
  const int ncolors = 1 << geo.dim;
  for (int color = 0; color < ncolors; ++color) {
    for_cells_of_color(g, color, [&](const std::array<int, kMaxDim>& ci) {
      double s[16];
      frozen_corner_coeffs(g, geo, state, ci, delta, s);
      const std::size_t base = cell_base_node(geo, ci);
      const double wy = center_weight(g, ci);
      const double wy2 = wy * wy;
      for (int a = 0; a < geo.dim; ++a) {
        const int bit = 1 << a;
        const double wa2 = a < geo.m ? 1.0 : wy2;
        const double coef =
            geo.corner_weight * wa2 * geo.inv_h[std::size_t(a)] * geo.inv_h[std::size_t(a)];
        for (int k = 0; k < geo.corners; ++k) {
          const int klo = k & ~bit;
          diag[base + geo.corner_off[std::size_t(k)]] += coef * (s[klo] + s[klo | bit]);
        }
      }
    });
  }
  par::for_each(g.node_count(), [&](std::size_t i) {
    diag[i] += g.node_weight(g.node_unflatten(i));
  });
  return diag;
}

std::vector<double> metric_diagonal(const Grid& g) {
  const CellGeometry geo(g);
  std::vector<double> diag(g.node_count(), 0.0);
  const int ncolors = 1 << geo.dim;
  for (int color = 0; color < ncolors; ++color) {
    for_cells_of_color(g, color, [&](const std::array<int, kMaxDim>& ci) {
      const std::size_t base = cell_base_node(geo, ci);
      const double wy = center_weight(g, ci);
      const double wy2 = wy * wy;
      for (int a = 0; a < geo.dim; ++a) {
        const double wa2 = a < geo.m ? 1.0 : wy2;
        const double coef = 2.0 * geo.corner_weight * wa2 * geo.inv_h[std::size_t(a)] *
                            geo.inv_h[std::size_t(a)];
        for (int k = 0; k < geo.corners; ++k)
          diag[base + geo.corner_off[std::size_t(k)]] += coef;
      }
    });
  }
  par::for_each(g.node_count(), [&](std::size_t i) {
    diag[i] += g.node_weight(g.node_unflatten(i));
  });
  return diag;
}

LineMetric build_line_metric(const Grid& g, const Field* state, double delta) {
  const CellGeometry geo(g);
  LineMetric lm;
  lm.grid = g;
  lm.diag.assign(g.node_count(), 0.0);
  lm.off.assign(g.node_count(), 0.0);
  const int last = g.dim() - 1;
  const int lastbit = 1 << last;
  const int ncolors = 1 << geo.dim;
  for (int color = 0; color < ncolors; ++color) {
    for_cells_of_color(g, color, [&](const std::array<int, kMaxDim>& ci) {
      double s[16];
      if (state) {
        frozen_corner_coeffs(g, geo, *state, ci, delta, s);
      } else {
        for (int k = 0; k < geo.corners; ++k) s[k] = 1.0;
      }
      const std::size_t base = cell_base_node(geo, ci);
      const double wy = center_weight(g, ci);
      const double wy2 = wy * wy;
      for (int a = 0; a < geo.dim; ++a) {
        const int bit = 1 << a;
        const double wa2 = a < geo.m ? 1.0 : wy2;
        const double coef =
            geo.corner_weight * wa2 * geo.inv_h[std::size_t(a)] * geo.inv_h[std::size_t(a)];
        for (int k = 0; k < geo.corners; ++k) {
          const int klo = k & ~bit;
          lm.diag[base + geo.corner_off[std::size_t(k)]] += coef * (s[klo] + s[klo | bit]);
        }
        if (a == last) {
          for (int k = 0; k < geo.corners; ++k) {
            if (k & lastbit) continue;
            lm.off[base + geo.corner_off[std::size_t(k)]] -= coef * (s[k] + s[k | lastbit]);
          }
        }
      }
    });
  }
  par::for_each(g.node_count(), [&](std::size_t i) {
    lm.diag[i] += g.node_weight(g.node_unflatten(i));
  });
  return lm;
}

void LineMetric::apply(const Field& r, Field& z) const {
  const Grid& g = grid;
  const int last = g.dim() - 1;
  const std::size_t npts_last = std::size_t(g.npts(last));
  if (npts_last > 4096)
    throw ValidationError("LineMetric: more than 4096 nodes along the last axis");
  const std::size_t nlines = g.node_count() / npts_last;
  // last axis is contiguous: each line is a stride-1 tridiagonal system
  par::for_each(nlines, [&](std::size_t line) {
    const std::size_t base = line * npts_last;
    double c_prime[4096];
    double d_prime[4096];
    const std::size_t nloc = npts_last;
    double beta = diag[base];
    c_prime[0] = off[base] / beta;
    d_prime[0] = r.values[base] / beta;
    for (std::size_t j = 1; j < nloc; ++j) {
      const double a = off[base + j - 1];
      beta = diag[base + j] - a * c_prime[j - 1];
      c_prime[j] = off[base + j] / beta;
      d_prime[j] = (r.values[base + j] - a * d_prime[j - 1]) / beta;
    }
    z.values[base + nloc - 1] = d_prime[nloc - 1];
    for (std::size_t j = nloc - 1; j-- > 0;)
      z.values[base + j] = d_prime[j] - c_prime[j] * z.values[base + j + 1];
  });
}

Field mass_apply(const Field& u) {
  Field r = Field::zeros(u.grid, BoundaryKind::free_values);
  const Grid& g = u.grid;
  par::for_each(g.node_count(), [&](std::size_t i) {
    r.values[i] = g.node_weight(g.node_unflatten(i)) * u.values[i];
  });
  return r;
}

double residual_norm(const Field& r) {
  const Grid& g = r.grid;
  return std::sqrt(par::sum(g.node_count(), [&](std::size_t i) {
    const double w = g.node_weight(g.node_unflatten(i));
    return r.values[i] * r.values[i] / w;
  }));
}

double dot(const Field& a, const Field& b) {
  return par::sum(a.values.size(), [&](std::size_t i) { return a.values[i] * b.values[i]; });
}

} // namespace grushin
