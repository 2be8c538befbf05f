// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce bit-identical results.

#include <chrono>
#include <cstdio>
#include <functional>

#include "dstop/boundary.hpp"
#include "dstop/examples_catalog.hpp"
#include "dstop/montecarlo.hpp"
#include "dstop/solver.hpp"

using namespace dstop;

namespace {

double time_of(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name,
              serial_s, parallel_s, parallel_s > 0 ? serial_s / parallel_s : 0.0,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  const ProblemSpec spec = find_example("exp-base")->spec;
  std::printf("workers: %d\n", worker_count());

  {
    SimulationOptions so;
    so.n = 20000;
    so.dt = 1e-3;
    so.seed = 7;
    so.record_stride = 100;
    std::vector<PathSample> serial_paths, parallel_paths;
    so.exec = Execution::serial;
    const double ts = time_of([&] { serial_paths = simulate_paths(spec, so); });
    so.exec = Execution::parallel;
    const double tp = time_of([&] { parallel_paths = simulate_paths(spec, so); });
    bool same = serial_paths.size() == parallel_paths.size();
    for (std::size_t i = 0; same && i < serial_paths.size(); ++i)
      same = serial_paths[i].x == parallel_paths[i].x &&
             serial_paths[i].theta == parallel_paths[i].theta;
    report("path simulation", ts, tp, same);
  }

  GridSpec grid;
  grid.nt = 200;
  grid.npi = 200;
  const ValueSurface surf = solve_finite(spec, grid);
  const Boundary boundary = extract_boundary(surf, spec.discounts);

  {
    EvalOptions eo;
    eo.n = 50000;
    eo.dt = 5e-4;
    eo.seed = 11;
    PolicyStats s_serial, s_parallel;
    eo.exec = Execution::serial;
    const double ts = time_of([&] { s_serial = evaluate_pi_formulation(spec, boundary, eo); });
    eo.exec = Execution::parallel;
    const double tp =
        time_of([&] { s_parallel = evaluate_pi_formulation(spec, boundary, eo); });
    report("policy evaluation", ts, tp,
           s_serial.mean_payoff == s_parallel.mean_payoff &&
               s_serial.std_error == s_parallel.std_error);
  }

  {
    ResidualOptions ro;
    std::vector<double> r_serial, r_parallel;
    ro.exec = Execution::serial;
    const double ts =
        time_of([&] { r_serial = integral_equation_residual(boundary, spec, ro); });
    ro.exec = Execution::parallel;
    const double tp =
        time_of([&] { r_parallel = integral_equation_residual(boundary, spec, ro); });
    report("integral-equation residual", ts, tp, r_serial == r_parallel);
  }

  return 0;
}
