#ifndef GRUSHIN_PARALLEL_HPP
#define GRUSHIN_PARALLEL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace grushin::par {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path (plain loops); `openmp` distributes the same work over threads.
/// Both paths perform bit-identical arithmetic: reductions always use the
/// fixed-block pairwise tree below, so results do not depend on the policy
/// or on the number of threads.
enum class Exec : std::uint8_t { serial, openmp };

/// Thread cap. 0 = use the OpenMP default. Honors the GRUSHIN_THREADS
/// environment variable on first use.
void set_max_threads(int t);
int max_threads();

/// Active policy for all kernels (openmp when compiled with OpenMP and
/// max_threads() > 1, else serial).
Exec active_exec();
void set_exec(Exec e);

namespace detail {
int resolved_threads();
}

/// Parallel loop over [0, n). `f(i)` must be safe to run concurrently for
/// distinct i under the openmp policy.
template <class F>
void for_each(std::size_t n, F&& f) {
#ifdef _OPENMP
  if (active_exec() == Exec::openmp && n > 1) {
    const int t = detail::resolved_threads();
    if (t > 1) {
#pragma omp parallel for schedule(static) num_threads(t)
      for (long long i = 0; i < (long long)n; ++i) f((std::size_t)i);
      return;
    }
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

/// Fixed leaf size of the deterministic reduction tree. Partial sums are
/// accumulated sequentially within each block; blocks are then combined by a
/// pairwise tree. The grouping depends only on n, never on the thread count.
inline constexpr std::size_t kReduceBlock = 2048;

namespace detail {
double combine_pairwise(std::vector<double>& parts);
}

/// Deterministic sum of term(i) for i in [0, n).
template <class F>
double sum(std::size_t n, F&& term) {
  if (n == 0) return 0.0;
  const std::size_t nb = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> parts(nb);
  for_each(nb, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    parts[b] = acc;
  });
  return detail::combine_pairwise(parts);
}

/// Deterministic max of term(i) (max is order-independent; the blocked
/// traversal is kept for symmetry with sum).
template <class F>
double max_value(std::size_t n, F&& term) {
  if (n == 0) return 0.0;
  const std::size_t nb = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> parts(nb);
  for_each(nb, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double acc = term(lo);
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double v = term(i);
      if (v > acc) acc = v;
    }
    parts[b] = acc;
  });
  double best = parts[0];
  for (std::size_t b = 1; b < parts.size(); ++b)
    if (parts[b] > best) best = parts[b];
  return best;
}

} // namespace grushin::par

#endif
