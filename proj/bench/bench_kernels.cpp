// Kernel benchmark: serial reference vs OpenMP for the data-parallel hot
// paths (quadrature reductions, energy assembly, weak-form residual, metric
// application). The two paths are bit-identical by construction; this target
// measures the speedup and asserts the equality once more on the way.
//
//   grushin_bench [--cells N] [--dim {2,3}] [--reps R] [--quick]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#include "grushin/operators.hpp"
#include "grushin/parallel.hpp"

using namespace grushin;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Timing {
  double serial = 0.0;
  double parallel = 0.0;
  bool identical = true;
};

template <class F>
Timing time_kernel(int reps, F&& f) {
  Timing t;
  par::set_exec(par::Exec::serial);
  par::set_max_threads(1);
  double ref = 0.0;
  {
    const double t0 = now();
    for (int r = 0; r < reps; ++r) ref = f();
    t.serial = (now() - t0) / reps;
  }
  par::set_exec(par::Exec::openmp);
  par::set_max_threads(0);
  double par_val = 0.0;
  {
    const double t0 = now();
    for (int r = 0; r < reps; ++r) par_val = f();
    t.parallel = (now() - t0) / reps;
  }
  t.identical = (ref == par_val);
  return t;
}

void report(const char* name, const Timing& t, std::size_t work_items) {
  std::printf("%-22s %10.3f ms %10.3f ms   x%5.2f   %8.1f Mitem/s   %s\n", name,
              1e3 * t.serial, 1e3 * t.parallel,
              t.parallel > 0 ? t.serial / t.parallel : 0.0,
              1e-6 * double(work_items) / (t.parallel > 0 ? t.parallel : 1.0),
              t.identical ? "bitwise-equal" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
  int cells = 192;
  int dim = 2;
  int reps = 5;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--cells") && i + 1 < argc) cells = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--dim") && i + 1 < argc) dim = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--reps") && i + 1 < argc) reps = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--quick")) { cells = 48; reps = 2; }
  }

  const GrushinParams q = dim == 3 ? GrushinParams::make(2, 1, 1.0, 2.0)
                                   : GrushinParams::make(1, 1, 1.0, 2.0);
  std::vector<std::pair<double, double>> box(std::size_t(dim), {-4.0, 4.0});
  std::vector<int> cc(std::size_t(dim), cells);
  const Grid g = build_grid(box, cc, q);

  std::mt19937_64 rng(4242u);
  Field u = Field::zeros(g, BoundaryKind::dirichlet_zero);
  for (auto& v : u.values) v = (double(rng() >> 11) * 0x1.0p-53) - 0.5;
  u.enforce_boundary();

  std::printf("grid: %dD, %d cells/axis, %zu nodes, %zu cells\n", dim, cells,
              g.node_count(), g.cell_count());
#ifdef _OPENMP
  std::printf("openmp enabled\n");
#else
  std::printf("openmp NOT enabled at build time; both columns run serial code\n");
#endif
  std::printf("%-22s %13s %13s %8s %14s\n", "kernel", "serial", "openmp", "speedup",
              "throughput");

  bool all_equal = true;
  {
    const Timing t = time_kernel(reps, [&] { return dirichlet_p_energy(u, 1e-8); });
    report("p-energy (p=2)", t, g.cell_count());
    all_equal &= t.identical;
  }
  {
    Grid g3 = g;
    g3.params.p = 3.0;
    g3.params.relaxed = true;
    Field u3 = u;
    u3.grid = g3;
    const Timing t = time_kernel(reps, [&] { return dirichlet_p_energy(u3, 1e-8); });
    report("p-energy (p=3)", t, g.cell_count());
    all_equal &= t.identical;
  }
  {
    const Timing t =
        time_kernel(reps, [&] { return residual_norm(weak_residual_bn(u, 0.5, 2.0, 1e-8)); });
    report("weak residual + norm", t, g.cell_count());
    all_equal &= t.identical;
  }
  {
    const Timing t = time_kernel(reps, [&] { return lp_norm(u, q.p_star()); });
    report("critical norm", t, g.node_count());
    all_equal &= t.identical;
  }
  {
    const Timing t = time_kernel(reps, [&] { return residual_norm(stiffness_apply(u)); });
    report("metric stiffness", t, g.cell_count());
    all_equal &= t.identical;
  }

  par::set_exec(par::Exec::openmp);
  par::set_max_threads(0);
  if (!all_equal) {
    std::printf("FAIL: a kernel differed between the serial and OpenMP paths\n");
    return 1;
  }
  std::printf("all kernels bitwise-equal across execution paths\n");
  return 0;
}
