#include "grushin/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace grushin::par {

namespace {

std::atomic<int> g_max_threads{-1}; // -1 = uninitialized
std::atomic<Exec> g_exec{
#ifdef _OPENMP
    Exec::openmp
#else
    Exec::serial
#endif
};

int env_threads() {
  if (const char* s = std::getenv("GRUSHIN_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return 0;
}

} // namespace

void set_max_threads(int t) { g_max_threads.store(t >= 0 ? t : 0); }

int max_threads() {
  int v = g_max_threads.load();
  if (v < 0) {
    v = env_threads();
    g_max_threads.store(v);
  }
  return v;
}

Exec active_exec() {
#ifdef _OPENMP
  if (g_exec.load() == Exec::openmp && detail::resolved_threads() > 1)
    return Exec::openmp;
#endif
  return Exec::serial;
}

void set_exec(Exec e) { g_exec.store(e); }

namespace detail {

int resolved_threads() {
  int cap = max_threads();
#ifdef _OPENMP
  int def = omp_get_max_threads();
  if (cap == 0) return def;
  return cap;
#else
  return cap == 0 ? 1 : cap;
#endif
}

double combine_pairwise(std::vector<double>& parts) {
  std::size_t m = parts.size();
  while (m > 1) {
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) parts[i] = parts[2 * i] + parts[2 * i + 1];
    if (m & 1) {
      parts[half] = parts[m - 1];
      m = half + 1;
    } else {
      m = half;
    }
  }
  return parts[0];
}

} // namespace detail

} // namespace grushin::par
