#include "grushin/params.hpp"

#include <cmath>
#include <string>

namespace grushin {

namespace {

void check_common(int m, int n, double gamma, double p) {
  if (m < 1 || n < 1)
    throw ValidationError("block dimensions must satisfy m >= 1 and n >= 1");
  if (m + n > kMaxDim)
    throw ValidationError("m + n must not exceed " + std::to_string(kMaxDim));
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ValidationError("gamma must be a finite real >= 0");
  if (!(p > 1.0) || !std::isfinite(p))
    throw ValidationError("p must be a finite real > 1");
}

} // namespace

GrushinParams GrushinParams::make(int m, int n, double gamma, double p) {
  check_common(m, n, gamma, p);
  const double ng = double(m) + (1.0 + gamma) * double(n);
  if (!(p < ng))
    throw ValidationError("p must be < N_gamma = " + std::to_string(ng) +
                          " (use make_relaxed for eigenvalue-only work)");
  return GrushinParams{m, n, gamma, p, false};
}

GrushinParams GrushinParams::make_relaxed(int m, int n, double gamma, double p) {
  check_common(m, n, gamma, p);
  GrushinParams q{m, n, gamma, p, true};
  return q;
}

double GrushinParams::p_star() const {
  const double ng = n_gamma();
  if (!(p < ng))
    throw ValidationError("critical exponent undefined: p >= N_gamma");
  return p * ng / (ng - p);
}

double GrushinParams::decay_alpha() const {
  const double ng = n_gamma();
  if (!(p < ng))
    throw ValidationError("decay exponent undefined: p >= N_gamma");
  return (ng - p) / (p - 1.0);
}

double GrushinParams::q0_weak() const { return p_star() * (p - 1.0) / p; }

} // namespace grushin
