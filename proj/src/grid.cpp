#include "grushin/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grushin/parallel.hpp"

namespace grushin {

std::size_t Grid::node_count() const {
  std::size_t n = 1;
  for (int a = 0; a < dim(); ++a) n *= std::size_t(npts(a));
  return n;
}

std::size_t Grid::cell_count() const {
  std::size_t n = 1;
  for (int a = 0; a < dim(); ++a) n *= std::size_t(cells[std::size_t(a)]);
  return n;
}

double Grid::cell_measure() const {
  double m = 1.0;
  for (int a = 0; a < dim(); ++a) m *= h[std::size_t(a)];
  return m;
}

double Grid::min_spacing() const {
  double m = h[0];
  for (int a = 1; a < dim(); ++a) m = std::min(m, h[std::size_t(a)]);
  return m;
}

double Grid::max_spacing() const {
  double m = h[0];
  for (int a = 1; a < dim(); ++a) m = std::max(m, h[std::size_t(a)]);
  return m;
}

std::array<std::size_t, kMaxDim> Grid::node_strides() const {
  std::array<std::size_t, kMaxDim> s{};
  const int d = dim();
  s[std::size_t(d - 1)] = 1;
  for (int a = d - 2; a >= 0; --a)
    s[std::size_t(a)] = s[std::size_t(a + 1)] * std::size_t(npts(a + 1));
  return s;
}

std::array<std::size_t, kMaxDim> Grid::cell_strides() const {
  std::array<std::size_t, kMaxDim> s{};
  const int d = dim();
  s[std::size_t(d - 1)] = 1;
  for (int a = d - 2; a >= 0; --a)
    s[std::size_t(a)] = s[std::size_t(a + 1)] * std::size_t(cells[std::size_t(a + 1)]);
  return s;
}

std::array<int, kMaxDim> Grid::node_unflatten(std::size_t idx) const {
  std::array<int, kMaxDim> mi{};
  for (int a = dim() - 1; a >= 0; --a) {
    const std::size_t np = std::size_t(npts(a));
    mi[std::size_t(a)] = int(idx % np);
    idx /= np;
  }
  return mi;
}

std::size_t Grid::node_flatten(const std::array<int, kMaxDim>& mi) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim(); ++a) idx = idx * std::size_t(npts(a)) + std::size_t(mi[std::size_t(a)]);
  return idx;
}

std::array<int, kMaxDim> Grid::cell_unflatten(std::size_t idx) const {
  std::array<int, kMaxDim> mi{};
  for (int a = dim() - 1; a >= 0; --a) {
    const std::size_t nc = std::size_t(cells[std::size_t(a)]);
    mi[std::size_t(a)] = int(idx % nc);
    idx /= nc;
  }
  return mi;
}

Point Grid::node_point(const std::array<int, kMaxDim>& mi) const {
  Point z;
  for (int a = 0; a < dim(); ++a)
    z[a] = lo[std::size_t(a)] + h[std::size_t(a)] * mi[std::size_t(a)];
  return z;
}

Point Grid::node_point(std::size_t idx) const { return node_point(node_unflatten(idx)); }

bool Grid::is_boundary(const std::array<int, kMaxDim>& mi) const {
  for (int a = 0; a < dim(); ++a) {
    const int i = mi[std::size_t(a)];
    if (i == 0 || i == cells[std::size_t(a)]) return true;
  }
  return false;
}

double Grid::node_weight(const std::array<int, kMaxDim>& mi) const {
  double w = cell_measure();
  for (int a = 0; a < dim(); ++a) {
    const int i = mi[std::size_t(a)];
    if (i == 0 || i == cells[std::size_t(a)]) w *= 0.5;
  }
  return w;
}

bool Grid::contains(const Point& z) const {
  for (int a = 0; a < dim(); ++a)
    if (z[a] < lo[std::size_t(a)] || z[a] > hi[std::size_t(a)]) return false;
  return true;
}

Grid build_grid(const std::vector<std::pair<double, double>>& box,
                const std::vector<int>& cells, const GrushinParams& params) {
  const int d = params.dim();
  if (int(box.size()) != d || int(cells.size()) != d)
    throw ValidationError("build_grid: box and cells must have m+n entries");
  Grid g;
  g.params = params;
  for (int a = 0; a < d; ++a) {
    const auto [lo, hi] = box[std::size_t(a)];
    if (!(hi > lo)) throw ValidationError("build_grid: degenerate box on axis " + std::to_string(a));
    if (cells[std::size_t(a)] < 4)
      throw ValidationError("build_grid: need at least 4 cells per axis");
    g.lo[std::size_t(a)] = lo;
    g.hi[std::size_t(a)] = hi;
    g.cells[std::size_t(a)] = cells[std::size_t(a)];
    g.h[std::size_t(a)] = (hi - lo) / cells[std::size_t(a)];
  }
  return g;
}

Field Field::zeros(const Grid& g, BoundaryKind b) {
  Field f;
  f.grid = g;
  f.boundary = b;
  f.values.assign(g.node_count(), 0.0);
  return f;
}

void Field::enforce_boundary() {
  if (boundary != BoundaryKind::dirichlet_zero) return;
  const std::size_t nn = grid.node_count();
  par::for_each(nn, [&](std::size_t i) {
    if (grid.is_boundary(grid.node_unflatten(i))) values[i] = 0.0;
  });
}

void Field::check_finite(const char* where) const {
  for (double v : values)
    if (!std::isfinite(v))
      throw SolverError(std::string(where) + ": field contains a non-finite value");
}

DomainMask DomainMask::whole_interior(const Grid& g) {
  return DomainMask::from_predicate(g, [](const Point&) { return true; });
}

std::size_t DomainMask::inside_count() const {
  std::size_t c = 0;
  for (auto b : inside) c += b;
  return c;
}

double lp_pow(const Field& u, double s) {
  if (!(s >= 1.0)) throw ValidationError("lp norm requires s >= 1");
  const Grid& g = u.grid;
  return par::sum(g.node_count(), [&](std::size_t i) {
    const double w = g.node_weight(g.node_unflatten(i));
    return w * std::pow(std::abs(u.values[i]), s);
  });
}

double lp_norm(const Field& u, double s) { return std::pow(lp_pow(u, s), 1.0 / s); }

double weak_lebesgue_seminorm(const Field& u, double s) {
  if (!(s > 0.0)) throw ValidationError("weak seminorm requires s > 0");
  const Grid& g = u.grid;
  const std::size_t nn = g.node_count();
  std::vector<std::pair<double, double>> lv(nn); // (|u|, weight)
  for (std::size_t i = 0; i < nn; ++i)
    lv[i] = {std::abs(u.values[i]), g.node_weight(g.node_unflatten(i))};
  std::sort(lv.begin(), lv.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = 0.0;
  double measure = 0.0;
  std::size_t i = 0;
  while (i < nn) {
    const double level = lv[i].first;
    if (level == 0.0) break;
    while (i < nn && lv[i].first == level) {
      measure += lv[i].second;
      ++i;
    }
    best = std::max(best, level * std::pow(measure, 1.0 / s));
  }
  return best;
}

namespace {

double sample_impl(const Field& u, const Point& z, bool zero_outside) {
  const Grid& g = u.grid;
  const int d = g.dim();
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < d; ++a) {
    const double t = (z[a] - g.lo[std::size_t(a)]) / g.h[std::size_t(a)];
    if (t < 0.0 || t > double(g.cells[std::size_t(a)])) {
      if (zero_outside || u.boundary == BoundaryKind::dirichlet_zero) return 0.0;
      throw ValidationError("sample: point outside the grid box of a free field");
    }
    int i = int(std::floor(t));
    if (i > g.cells[std::size_t(a)] - 1) i = g.cells[std::size_t(a)] - 1;
    base[std::size_t(a)] = i;
    frac[std::size_t(a)] = t - double(i);
  }
  const auto stride = g.node_strides();
  std::size_t anchor = 0;
  for (int a = 0; a < d; ++a) anchor += std::size_t(base[std::size_t(a)]) * stride[std::size_t(a)];
  const int corners = 1 << d;
  double acc = 0.0;
  for (int k = 0; k < corners; ++k) {
    double wt = 1.0;
    std::size_t idx = anchor;
    for (int a = 0; a < d; ++a) {
      if (k & (1 << a)) {
        wt *= frac[std::size_t(a)];
        idx += stride[std::size_t(a)];
      } else {
        wt *= 1.0 - frac[std::size_t(a)];
      }
    }
    if (wt != 0.0) acc += wt * u.values[idx];
  }
  return acc;
}

} // namespace

double sample(const Field& u, const Point& z) { return sample_impl(u, z, false); }
double sample_or_zero(const Field& u, const Point& z) { return sample_impl(u, z, true); }

Field rescale_field(const Field& u, const std::vector<double>& e, double rho,
                    const Grid& target) {
  if (!(rho > 0.0)) throw ValidationError("rescale_field: rho must be > 0");
  const GrushinParams& q = target.params;
  if (int(e.size()) != q.n)
    throw ValidationError("rescale_field: translation must have n entries");
  const double amp = std::pow(rho, (q.n_gamma() - q.p) / q.p);
  const double ry = std::pow(rho, 1.0 + q.gamma);
  Field out = Field::zeros(target, u.boundary);
  par::for_each(target.node_count(), [&](std::size_t i) {
    const Point z = target.node_point(i);
    Point arg;
    for (int a = 0; a < q.m; ++a) arg[a] = rho * z[a];
    for (int j = 0; j < q.n; ++j) arg[q.m + j] = ry * z[q.m + j] + e[std::size_t(j)];
    out.values[i] = amp * sample_or_zero(u, arg);
  });
  out.enforce_boundary();
  return out;
}

double boundary_mass_fraction(const Field& u, double s, double frac) {
  const Grid& g = u.grid;
  const std::size_t nn = g.node_count();
  const double total = lp_pow(u, s);
  if (total == 0.0) return 0.0;
  const double shell = par::sum(nn, [&](std::size_t i) {
    const auto mi = g.node_unflatten(i);
    bool near = false;
    for (int a = 0; a < g.dim(); ++a) {
      const double width = g.hi[std::size_t(a)] - g.lo[std::size_t(a)];
      const double z = g.lo[std::size_t(a)] + g.h[std::size_t(a)] * mi[std::size_t(a)];
      if (z - g.lo[std::size_t(a)] < frac * width || g.hi[std::size_t(a)] - z < frac * width)
        near = true;
    }
    if (!near) return 0.0;
    return g.node_weight(mi) * std::pow(std::abs(u.values[i]), s);
  });
  return shell / total;
}

void write_field(const Field& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("write_field: cannot open " + path);
  const Grid& g = u.grid;
  char buf[64];
  os << "GRUSHIN-FIELD v1 " << g.params.m << ' ' << g.params.n << ' ';
  std::snprintf(buf, sizeof buf, "%.17g", g.params.gamma);
  os << buf << ' ';
  std::snprintf(buf, sizeof buf, "%.17g", g.params.p);
  os << buf << ' ';
  for (int a = 0; a < g.dim(); ++a) {
    if (a) os << ',';
    std::snprintf(buf, sizeof buf, "%.17g", g.lo[std::size_t(a)]);
    os << buf << ':';
    std::snprintf(buf, sizeof buf, "%.17g", g.hi[std::size_t(a)]);
    os << buf;
  }
  os << ' ';
  for (int a = 0; a < g.dim(); ++a) {
    if (a) os << ',';
    os << g.cells[std::size_t(a)];
  }
  os << ' ' << (u.boundary == BoundaryKind::dirichlet_zero ? "dirichlet_zero" : "free") << '\n';
  for (double v : u.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
  if (!os) throw IoError("write_field: write failure on " + path);
}

Field read_field(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("read_field: cannot open " + path);
  std::string magic, version;
  int m = 0, n = 0;
  double gamma = 0.0, p = 0.0;
  std::string boxspec, cellspec, bkind;
  is >> magic >> version >> m >> n >> gamma >> p >> boxspec >> cellspec >> bkind;
  if (!is || magic != "GRUSHIN-FIELD" || version != "v1")
    throw IoError("read_field: bad header in " + path);
  const double ng = double(m) + (1.0 + gamma) * double(n);
  const GrushinParams params = p < ng ? GrushinParams::make(m, n, gamma, p)
                                      : GrushinParams::make_relaxed(m, n, gamma, p);
  std::vector<std::pair<double, double>> box;
  {
    std::stringstream ss(boxspec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw IoError("read_field: bad boxspec");
      box.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    }
  }
  std::vector<int> cells;
  {
    std::stringstream ss(cellspec);
    std::string item;
    while (std::getline(ss, item, ',')) cells.push_back(std::stoi(item));
  }
  const Grid g = build_grid(box, cells, params);
  Field f = Field::zeros(g, bkind == "free" ? BoundaryKind::free_values
                                            : BoundaryKind::dirichlet_zero);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!(is >> f.values[i]))
      throw IoError("read_field: node count mismatch (short file) in " + path);
  }
  double extra;
  if (is >> extra) throw IoError("read_field: node count mismatch (extra data) in " + path);
  return f;
}

} // namespace grushin
