#include "grushin/geometry.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace grushin {

namespace {

double x_norm_sq(const GrushinParams& q, const Point& z) {
  double s = 0.0;
  for (int i = 0; i < q.m; ++i) s += z[i] * z[i];
  return s;
}

double y_norm_sq(const GrushinParams& q, const Point& z) {
  double s = 0.0;
  for (int j = q.m; j < q.dim(); ++j) s += z[j] * z[j];
  return s;
}

// C^2 step from 1 to 0 as t goes 0 -> 1.
double smoothstep_down(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double sphere_area_coeff(int k) {
  // surface measure of the unit sphere S^{k-1}: 2 pi^{k/2} / Gamma(k/2)
  return 2.0 * std::pow(M_PI, 0.5 * k) / std::tgamma(0.5 * k);
}

double reduced_gauge(double g, double r, double s) {
  const double a = std::pow(r * r, g + 1.0);
  const double b = (g + 1.0) * (g + 1.0) * s * s;
  return std::pow(a + b, 0.5 / (g + 1.0));
}

// Quadrature of the smoothed unit-ball indicator on the (|x|, |y|) quarter
// plane with the radial surface measures reinstated.
double unit_ball_quadrature(const GrushinParams& q, int res) {
  const double g = q.gamma;
  const double w = 6.0 / double(res);
  const double rmax = 1.0 + 2.0 * w;
  const double smax = std::pow(1.0 + 2.0 * w, g + 1.0) / (g + 1.0);
  const double hr = rmax / res;
  const double hs = smax / res;
  const double am = sphere_area_coeff(q.m);
  const double an = sphere_area_coeff(q.n);
  double acc = 0.0;
  for (int i = 0; i < res; ++i) {
    const double r = (i + 0.5) * hr;
    const double rm = q.m == 1 ? 1.0 : std::pow(r, q.m - 1);
    double row = 0.0;
    for (int j = 0; j < res; ++j) {
      const double s = (j + 0.5) * hs;
      const double d = reduced_gauge(g, r, s);
      const double chi = smoothstep_down((d - (1.0 - w)) / (2.0 * w));
      if (chi == 0.0) continue;
      const double sn = q.n == 1 ? 1.0 : std::pow(s, q.n - 1);
      row += sn * chi;
    }
    acc += rm * row;
  }
  return am * an * acc * hr * hs;
}

struct BallKey {
  int m, n;
  double gamma;
  bool operator<(const BallKey& o) const {
    return std::tie(m, n, gamma) < std::tie(o.m, o.n, o.gamma);
  }
};

std::map<BallKey, double> g_ball_cache;
std::mutex g_ball_mutex;

} // namespace

double gauge(const GrushinParams& params, const Point& z) {
  const double g = params.gamma;
  const double xs = x_norm_sq(params, z);
  const double ys = y_norm_sq(params, z);
  const double a = std::pow(xs, g + 1.0);
  const double b = (g + 1.0) * (g + 1.0) * ys;
  if (a == 0.0 && b == 0.0) return 0.0;
  return std::pow(a + b, 0.5 / (g + 1.0));
}

Point dilate(const GrushinParams& params, double rho, const Point& z) {
  if (!(rho > 0.0)) throw ValidationError("dilate: rho must be > 0");
  Point out;
  const double ry = std::pow(rho, params.gamma + 1.0);
  for (int i = 0; i < params.m; ++i) out[i] = rho * z[i];
  for (int j = params.m; j < params.dim(); ++j) out[j] = ry * z[j];
  return out;
}

double gauge_dist(const GrushinParams& params, const Point& z, const Point& w) {
  Point diff;
  for (int i = 0; i < params.dim(); ++i) diff[i] = z[i] - w[i];
  return gauge(params, diff);
}

double fundamental_profile(const GrushinParams& params, const Point& z) {
  const double d = gauge(params, z);
  if (d == 0.0) throw ValidationError("fundamental_profile: singular at z = 0");
  const double ng = params.n_gamma();
  if (params.p == ng) return -std::log(d);
  return std::pow(d, (params.p - ng) / (params.p - 1.0));
}

double unit_gauge_ball_volume(const GrushinParams& params) {
  const BallKey key{params.m, params.n, params.gamma};
  {
    std::lock_guard<std::mutex> lock(g_ball_mutex);
    auto it = g_ball_cache.find(key);
    if (it != g_ball_cache.end()) return it->second;
  }
  const double fine = unit_ball_quadrature(params, 512);
  const double coarse = unit_ball_quadrature(params, 256);
  if (std::abs(fine - coarse) > 5e-3 * std::abs(fine))
    throw SolverError("unit_gauge_ball_volume: quadrature failed its refinement check");
  {
    std::lock_guard<std::mutex> lock(g_ball_mutex);
    g_ball_cache[key] = fine;
  }
  return fine;
}

double gauge_ball_volume(const GrushinParams& params, double R) {
  if (!(R > 0.0)) throw ValidationError("gauge_ball_volume: R must be > 0");
  return unit_gauge_ball_volume(params) * std::pow(R, params.n_gamma());
}

double gauge_gradient_magnitude(const GrushinParams& params, const Point& z) {
  const double d = gauge(params, z);
  if (d == 0.0) throw ValidationError("gauge_gradient_magnitude: singular at z = 0");
  const double xn = std::sqrt(x_norm_sq(params, z));
  if (params.gamma == 0.0) return 1.0;
  return std::pow(xn / d, params.gamma);
}

Point gauge_gradient(const GrushinParams& params, const Point& z) {
  const double d = gauge(params, z);
  if (d == 0.0) throw ValidationError("gauge_gradient: singular at z = 0");
  const double g = params.gamma;
  const double xs = x_norm_sq(params, z);
  const double xn = std::sqrt(xs);
  const double dpow = std::pow(d, 2.0 * g + 1.0);
  const double xg = g == 0.0 ? 1.0 : std::pow(xs, g); // |x|^{2 gamma}
  const double wg = g == 0.0 ? 1.0 : std::pow(xn, g); // |x|^gamma
  Point out;
  for (int i = 0; i < params.m; ++i) out[i] = xg * z[i] / dpow;
  for (int j = params.m; j < params.dim(); ++j)
    out[j] = wg * (g + 1.0) * z[j] / dpow;
  return out;
}

} // namespace grushin
