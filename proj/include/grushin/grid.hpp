#ifndef GRUSHIN_GRID_HPP
#define GRUSHIN_GRID_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "grushin/params.hpp"

namespace grushin {

/// Tensor-product rectangular grid over a box in R^{m+n}. Stores per-axis
/// data only. Node numbering is row-major with the FIRST axis slowest (the
/// last axis is contiguous).
struct Grid {
  GrushinParams params;
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
  std::array<double, kMaxDim> h{};
  std::array<int, kMaxDim> cells{};

  int dim() const { return params.dim(); }
  int npts(int axis) const { return cells[std::size_t(axis)] + 1; }

  std::size_t node_count() const;
  std::size_t cell_count() const;
  double cell_measure() const;
  double min_spacing() const;
  double max_spacing() const;

  std::array<std::size_t, kMaxDim> node_strides() const;
  std::array<std::size_t, kMaxDim> cell_strides() const;

  std::array<int, kMaxDim> node_unflatten(std::size_t idx) const;
  std::size_t node_flatten(const std::array<int, kMaxDim>& mi) const;
  std::array<int, kMaxDim> cell_unflatten(std::size_t idx) const;

  Point node_point(const std::array<int, kMaxDim>& mi) const;
  Point node_point(std::size_t idx) const;
  bool is_boundary(const std::array<int, kMaxDim>& mi) const;

  /// Trapezoidal quadrature weight of a node: cell measure times 1/2 per
  /// boundary-touching axis.
  double node_weight(const std::array<int, kMaxDim>& mi) const;

  bool contains(const Point& z) const;

  bool operator==(const Grid&) const = default;
};

/// box[i] = {a_i, b_i}. Requires >= 4 cells per axis and a nondegenerate box.
Grid build_grid(const std::vector<std::pair<double, double>>& box,
                const std::vector<int>& cells, const GrushinParams& params);

enum class BoundaryKind : std::uint8_t { dirichlet_zero, free_values };

/// A function sampled at grid nodes. dirichlet_zero fields vanish identically
/// on the grid boundary and extend by zero outside the box.
struct Field {
  Grid grid;
  BoundaryKind boundary = BoundaryKind::dirichlet_zero;
  std::vector<double> values;

  static Field zeros(const Grid& g, BoundaryKind b = BoundaryKind::dirichlet_zero);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Zeroes every boundary node (no-op for free fields).
  void enforce_boundary();
  /// Throws if any value is non-finite.
  void check_finite(const char* where) const;
};

/// Node subset defining a bounded open domain inside the grid box.
/// Boundary nodes of the grid are never inside.
struct DomainMask {
  Grid grid;
  std::vector<std::uint8_t> inside;
  bool intersects_degeneration = false;

  static DomainMask whole_interior(const Grid& g);
  template <class Pred>
  static DomainMask from_predicate(const Grid& g, Pred&& keep);

  std::size_t inside_count() const;
};

/// (sum_nodes w |u|^s cellfactors)^{1/s} with trapezoidal node weights.
double lp_norm(const Field& u, double s);
/// Same sum without the final root: sum w |u|^s.
double lp_pow(const Field& u, double s);

/// sup_{t>0} t mu(|u| > t)^{1/s} for the discrete (node-weighted) measure;
/// equals max over distinct sample levels v of v mu(|u| >= v)^{1/s}.
double weak_lebesgue_seminorm(const Field& u, double s);

/// Multilinear interpolation. Exact at nodes and on multilinear functions.
/// Outside the box: 0 for dirichlet fields, error for free fields.
double sample(const Field& u, const Point& z);

/// Same but always zero outside the box (rescaling semantics).
double sample_or_zero(const Field& u, const Point& z);

/// u^{e,rho}(z) = rho^{(N_gamma-p)/p} u(rho x, rho^{1+gamma} y + e) sampled on
/// `target`, zero-extended outside the source box. e has length n.
Field rescale_field(const Field& u, const std::vector<double>& e, double rho,
                    const Grid& target);

/// Fraction of the |u|^s mass carried by nodes within `frac` of the box edge
/// (per axis). Used for truncation warnings.
double boundary_mass_fraction(const Field& u, double s, double frac = 0.1);

// --- dump format ------------------------------------------------------------
// One header line:
//   GRUSHIN-FIELD v1 m n gamma p boxspec cellspec boundary_kind
// boxspec  = lo:hi[,lo:hi...]   cellspec = c[,c...]
// followed by one node value per line, row-major (first axis slowest),
// 17 significant digits.
void write_field(const Field& u, const std::string& path);
Field read_field(const std::string& path);

template <class Pred>
DomainMask DomainMask::from_predicate(const Grid& g, Pred&& keep) {
  DomainMask m;
  m.grid = g;
  m.inside.assign(g.node_count(), 0);
  const std::size_t nn = g.node_count();
  double hx = 0.0;
  for (int a = 0; a < g.params.m; ++a) hx = hx > g.h[std::size_t(a)] ? hx : g.h[std::size_t(a)];
  for (std::size_t i = 0; i < nn; ++i) {
    const auto mi = g.node_unflatten(i);
    if (g.is_boundary(mi)) continue;
    const Point z = g.node_point(mi);
    if (!keep(z)) continue;
    m.inside[i] = 1;
    double xn = 0.0;
    for (int a = 0; a < g.params.m; ++a) xn += z[a] * z[a];
    if (xn <= hx * hx) m.intersects_degeneration = true;
  }
  return m;
}

} // namespace grushin

#endif
