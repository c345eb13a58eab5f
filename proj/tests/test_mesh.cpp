#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "grushin/grid.hpp"

using namespace grushin;

namespace {

const GrushinParams kP112 = GrushinParams::make(1, 1, 1.0, 2.0);

Field sampled(const Grid& g, BoundaryKind b, double (*f)(double, double)) {
  Field u = Field::zeros(g, b);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Point z = g.node_point(i);
    u.values[i] = f(z[0], z[1]);
  }
  if (b == BoundaryKind::dirichlet_zero) u.enforce_boundary();
  return u;
}

std::mt19937_64 rng(555u);
double uniform(double lo, double hi) { return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53); }

} // namespace

TEST_CASE("build_grid basics") {
  const Grid g = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {8, 8}, kP112);
  CHECK(g.h[0] == doctest::Approx(0.25));
  CHECK(g.h[1] == doctest::Approx(0.25));
  CHECK(g.node_count() == 81);

  const Grid r = build_grid({{-2.0, 2.0}, {-1.0, 1.0}}, {16, 8}, kP112);
  CHECK(r.h[0] == doctest::Approx(0.25));
  CHECK(r.h[1] == doctest::Approx(0.25));

  CHECK_THROWS_AS(build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {3, 8}, kP112), ValidationError);
  CHECK_THROWS_AS(build_grid({{1.0, 1.0}, {-1.0, 1.0}}, {8, 8}, kP112), ValidationError);

  // node coordinates reproducible bit-exactly from (box, cells)
  const Grid g2 = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {8, 8}, kP112);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    CHECK(g.node_point(i)[0] == g2.node_point(i)[0]);
    CHECK(g.node_point(i)[1] == g2.node_point(i)[1]);
  }
}

TEST_CASE("lp_norm on the unit box") {
  const Grid g = build_grid({{0.0, 1.0}, {0.0, 1.0}}, {16, 16}, kP112);
  Field one = Field::zeros(g, BoundaryKind::free_values);
  for (auto& v : one.values) v = 1.0;
  CHECK(lp_norm(one, 2.0) == doctest::Approx(1.0).epsilon(1e-13));

  // homogeneity
  Field u = sampled(g, BoundaryKind::free_values,
                    [](double x, double y) { return std::sin(3 * x) + y; });
  Field cu = u;
  for (auto& v : cu.values) v *= -2.5;
  CHECK(lp_norm(cu, 3.0) == doctest::Approx(2.5 * lp_norm(u, 3.0)).epsilon(1e-13));

  CHECK_THROWS_AS(lp_norm(u, 0.5), ValidationError);
}

TEST_CASE("lp_norm quadrature oracle: integral of x^2 over the unit square") {
  // exact value 1/3, so the L2 norm of u(x,y) = x is 1/sqrt(3)
  const Grid g = build_grid({{0.0, 1.0}, {0.0, 1.0}}, {64, 64}, kP112);
  const Field u = sampled(g, BoundaryKind::free_values, [](double x, double) { return x; });
  CHECK(lp_norm(u, 2.0) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-3));
}

TEST_CASE("lp_norm converges at order >= 2 for smooth integrands") {
  auto err = [](int cells) {
    const Grid g = build_grid({{0.0, 1.0}, {0.0, 1.0}}, {cells, cells},
                              GrushinParams::make(1, 1, 1.0, 2.0));
    const Field u = sampled(g, BoundaryKind::free_values,
                            [](double x, double y) { return std::sin(x) * std::cos(y); });
    // exact: integral of sin^2 x cos^2 y over [0,1]^2
    const double ix = 0.5 - std::sin(2.0) / 4.0;
    const double iy = 0.5 + std::sin(2.0) / 4.0;
    return std::abs(lp_pow(u, 2.0) - ix * iy);
  };
  const double e1 = err(16), e2 = err(32), e3 = err(64);
  CHECK(e1 / e2 >= 3.5); // order 2 gives a factor 4
  CHECK(e2 / e3 >= 3.5);
}

TEST_CASE("weak Lebesgue seminorm") {
  const Grid g = build_grid({{0.0, 1.0}, {0.0, 1.0}}, {32, 32}, kP112);

  // two-level function: c on a region of measure A
  Field u = Field::zeros(g, BoundaryKind::free_values);
  double area = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Point z = g.node_point(i);
    if (z[0] < 0.5) {
      u.values[i] = 3.0;
      area += g.node_weight(g.node_unflatten(i));
    }
  }
  for (double s : {1.0, 2.0, 3.5})
    CHECK(weak_lebesgue_seminorm(u, s) == doctest::Approx(3.0 * std::pow(area, 1.0 / s)));

  // positive homogeneity
  Field v = sampled(g, BoundaryKind::free_values,
                    [](double x, double y) { return std::sin(5 * x) * y; });
  Field cv = v;
  for (auto& w : cv.values) w *= 4.0;
  CHECK(weak_lebesgue_seminorm(cv, 2.0) ==
        doctest::Approx(4.0 * weak_lebesgue_seminorm(v, 2.0)).epsilon(1e-13));

  // Chebyshev: [u]_{s,inf} <= ||u||_s for s >= 1, random fields
  for (int trial = 0; trial < 20; ++trial) {
    Field w = Field::zeros(g, BoundaryKind::free_values);
    for (auto& x : w.values) x = uniform(-2.0, 2.0);
    for (double s : {1.0, 2.0, 4.0})
      CHECK(weak_lebesgue_seminorm(w, s) <= lp_norm(w, s) * (1.0 + 1e-12));
  }
}

TEST_CASE("multilinear sampling") {
  const Grid g = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {8, 8}, kP112);
  Field u = sampled(g, BoundaryKind::free_values, [](double x, double y) { return x + y; });

  // exact at nodes
  for (std::size_t i = 0; i < u.size(); i += 7) {
    const Point z = g.node_point(i);
    CHECK(sample(u, z) == u.values[i]);
  }
  // multilinear at a cell midpoint: average of corners
  Point mid;
  mid[0] = -1.0 + 0.125;
  mid[1] = -1.0 + 0.125;
  CHECK(sample(u, mid) == doctest::Approx(mid[0] + mid[1]).epsilon(1e-14));

  // outside the box
  Point out;
  out[0] = 2.0;
  out[1] = 0.0;
  CHECK_THROWS_AS(sample(u, out), ValidationError);
  Field ud = u;
  ud.boundary = BoundaryKind::dirichlet_zero;
  ud.enforce_boundary();
  CHECK(sample(ud, out) == 0.0);
}

TEST_CASE("rescale_field identity and composition") {
  const Grid g = build_grid({{-4.0, 4.0}, {-4.0, 4.0}}, {96, 96}, kP112);
  Field u = sampled(g, BoundaryKind::dirichlet_zero, [](double x, double y) {
    const double d2 = x * x + y * y;
    return d2 < 9.0 ? (9.0 - d2) * (9.0 - d2) / 81.0 : 0.0;
  });

  const Field same = rescale_field(u, {0.0}, 1.0, g);
  for (std::size_t i = 0; i < u.size(); i += 13)
    CHECK(same.values[i] == doctest::Approx(u.values[i]).epsilon(1e-13));

  // round trip rho then 1/rho: two interpolation errors, O(h^2)
  const Field fwd = rescale_field(u, {0.0}, 1.3, g);
  const Field back = rescale_field(fwd, {0.0}, 1.0 / 1.3, g);
  double maxdiff = 0.0, maxval = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    maxdiff = std::max(maxdiff, std::abs(back.values[i] - u.values[i]));
    maxval = std::max(maxval, std::abs(u.values[i]));
  }
  CHECK(maxdiff <= 0.01 * maxval);
}

TEST_CASE("rescaling preserves the critical norm and the p-energy scaling") {
  // ||u^{0,rho}||_{p*} = ||u||_{p*} within 1% for smooth u on fine grids
  const Grid g = build_grid({{-6.0, 6.0}, {-6.0, 6.0}}, {256, 256}, kP112);
  Field u = sampled(g, BoundaryKind::dirichlet_zero, [](double x, double y) {
    return std::exp(-(x * x + 2.0 * y * y));
  });
  const double ps = kP112.p_star();
  const double base = lp_norm(u, ps);
  for (double rho : {0.8, 1.25}) {
    const Field v = rescale_field(u, {0.0}, rho, g);
    CHECK(lp_norm(v, ps) == doctest::Approx(base).epsilon(0.01));
  }
}

TEST_CASE("field dump round trip and mismatch rejection") {
  const Grid g = build_grid({{-1.0, 2.0}, {0.0, 1.0}}, {8, 12}, kP112);
  Field u = sampled(g, BoundaryKind::dirichlet_zero,
                    [](double x, double y) { return 0.25 * x - 1.75 * y; });
  u.enforce_boundary();
  const std::string path = "/tmp/grushin_test_field.txt";
  write_field(u, path);
  const Field v = read_field(path);
  REQUIRE(v.size() == u.size());
  CHECK(v.boundary == u.boundary);
  CHECK(v.grid == u.grid);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(v.values[i] == u.values[i]);

  // corrupt: drop the last line
  {
    std::string all;
    {
      FILE* f = std::fopen(path.c_str(), "rb");
      REQUIRE(f);
      char buf[1 << 12];
      std::size_t got;
      while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) all.append(buf, got);
      std::fclose(f);
    }
    const auto cut = all.find_last_of('\n', all.size() - 2);
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(all.data(), 1, cut + 1, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_field(path), IoError);
}

TEST_CASE("domain mask flags degeneration overlap") {
  const Grid g = build_grid({{-1.0, 1.0}, {-1.0, 1.0}}, {16, 16}, kP112);
  const DomainMask whole = DomainMask::whole_interior(g);
  CHECK(whole.intersects_degeneration);
  const DomainMask off = DomainMask::from_predicate(
      g, [](const Point& z) { return z[0] > 0.4; });
  CHECK_FALSE(off.intersects_degeneration);
  CHECK(off.inside_count() > 0);
  CHECK(whole.inside_count() == std::size_t(15 * 15));
}
