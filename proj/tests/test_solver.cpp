#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dstop/examples_catalog.hpp"
#include "dstop/solver.hpp"

using namespace dstop;

namespace {

ProblemSpec base_spec() { return find_example("exp-base")->spec; }

ValueSurface solve_base_200() {
  GridSpec g;
  g.nt = 200;
  g.npi = 200;
  static ValueSurface cached = solve_finite(base_spec(), g);
  return cached;
}

}  // namespace

TEST_CASE("grid validation rejects malformed parameters") {
  GridSpec g;
  CHECK_NOTHROW(check_grid(g));
  g.nt = 0;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.npi = 2;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.theta_weight = 1.5;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.psor_tol = 0.0;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.psor_omega = 2.0;  // 2 is the divergence threshold, not admissible
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.psor_max_iter = 0;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.rannacher_steps = -1;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.horizon_tail_tol = 0.0;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
  g = GridSpec{};
  g.initial_horizon = -1.0;
  CHECK_THROWS_AS(check_grid(g), std::invalid_argument);
}

TEST_CASE("gain is the positive part of the reward-penalty balance") {
  const DiscountPair& pair = base_spec().discounts;
  // Frozen: c1(1) * 0.8 - c0(1) * 0.2 with 30-digit constants.
  CHECK(gain(pair, 1.0, 0.8) == doctest::Approx(0.160239543730026).epsilon(1e-13));
  CHECK(gain(pair, 0.0, 0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(gain(pair, 0.0, 0.2) == 0.0);  // floored
  CHECK(gain(pair, 0.3, 1.0) == doctest::Approx(pair.c1.value(0.3)).epsilon(1e-14));
  CHECK(gain(pair, 0.3, 0.0) == 0.0);
}

TEST_CASE("solved value is pinned at the reference grid") {
  // Deterministic PSOR at fixed grid: the value is reproducible to
  // machine-level between runs. Frozen from the current solver.
  ValueSurface s = solve_base_200();
  CHECK(s.value_at(0.0, 0.5) == doctest::Approx(0.197081291729).epsilon(1e-9));
  CHECK(s.horizon == 1.0);
  CHECK_FALSE(s.horizon_clipped);
  CHECK(s.has_terminal_row);
  CHECK(s.t_grid.size() == 201);
  CHECK(s.pi_grid.size() == 202);
}

TEST_CASE("value dominates gain and hits it on the stop region") {
  ValueSurface s = solve_base_200();
  const double slack = 1e-12;
  for (std::size_t i = 0; i < s.t_grid.size(); ++i)
    for (std::size_t j = 0; j < s.pi_grid.size(); ++j) {
      CHECK(s.v(i, j) >= s.g(i, j) - slack);
      if (s.stopped(i, j))
        CHECK(s.v(i, j) - s.g(i, j) <= s.contact_tol * (1.0 + std::abs(s.g(i, j))));
    }
}

TEST_CASE("value is monotone and convex in the belief") {
  ValueSurface s = solve_base_200();
  const double tol = 1e-9;
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    for (std::size_t j = 0; j + 1 < s.pi_grid.size(); ++j)
      CHECK(s.v(i, j + 1) >= s.v(i, j) - tol);
    for (std::size_t j = 1; j + 1 < s.pi_grid.size(); ++j)
      CHECK(s.v(i, j + 1) - 2.0 * s.v(i, j) + s.v(i, j - 1) >= -tol);
  }
}

TEST_CASE("value obeys the discount-sum Lipschitz bound in belief") {
  // |V(t, p) - V(t, q)| <= (c0(t) + c1(t)) |p - q|: the gain gradient
  // bound survives the dynamic-programming recursion.
  ValueSurface s = solve_base_200();
  const DiscountPair& pair = base_spec().discounts;
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    const double lip = pair.c0.value(s.t_grid[i]) + pair.c1.value(s.t_grid[i]);
    for (std::size_t j = 0; j + 1 < s.pi_grid.size(); ++j)
      CHECK(std::abs(s.v(i, j + 1) - s.v(i, j)) <= lip * s.dpi() + 1e-10);
  }
}

TEST_CASE("terminal row and belief endpoints carry their boundary data") {
  ValueSurface s = solve_base_200();
  const DiscountPair& pair = base_spec().discounts;
  const std::size_t last_row = s.t_grid.size() - 1;
  for (std::size_t j = 0; j < s.pi_grid.size(); ++j) {
    CHECK(s.v(last_row, j) == s.g(last_row, j));  // stop-now value at the horizon
    CHECK(s.stopped(last_row, j));
  }
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    CHECK(s.v(i, 0) == 0.0);  // hopeless belief never earns
    CHECK(s.v(i, s.pi_grid.size() - 1) ==
          doctest::Approx(pair.c1.value(s.t_grid[i])).epsilon(1e-14));
  }
}

TEST_CASE("shrinking the horizon collapses the value onto the gain") {
  ProblemSpec tiny = base_spec();
  tiny.horizon = 1e-4;
  GridSpec g;
  g.nt = 4;
  g.npi = 100;
  ValueSurface s = solve_finite(tiny, g);
  double dmax = 0.0;
  for (std::size_t j = 0; j < s.pi_grid.size(); ++j)
    dmax = std::max(dmax, std::abs(s.v(0, j) - s.g(0, j)));
  CHECK(dmax < 2e-3);  // measured 1.18e-3: the waiting premium dies with T
}

TEST_CASE("longer horizons are worth more") {
  ProblemSpec half = base_spec();
  half.horizon = 0.5;
  GridSpec g;
  g.nt = 100;
  g.npi = 100;
  ValueSurface vh = solve_finite(half, g);
  GridSpec g2;
  g2.nt = 200;
  g2.npi = 100;
  ValueSurface vf = solve_finite(base_spec(), g2);
  // Same dt and belief grid: node-for-node domination on the shared window.
  for (std::size_t i = 0; i < vh.t_grid.size(); ++i)
    for (std::size_t j = 0; j < vh.v.cols; ++j)
      CHECK(vf.v(i, j) >= vh.v(i, j) - 1e-9);
}

TEST_CASE("pde residual is small deep in the continuation region") {
  ValueSurface s = solve_base_200();
  Matrix res = pde_residual(s, base_spec());
  REQUIRE(res.rows == s.t_grid.size());
  REQUIRE(res.cols == s.pi_grid.size());
  // Rows without a central time stencil are zero by contract.
  for (std::size_t j = 0; j < res.cols; ++j) {
    CHECK(res(0, j) == 0.0);
    CHECK(res(res.rows - 1, j) == 0.0);
  }
  double mx_mid = 0.0, mx_stopped = 0.0;
  for (std::size_t i = 1; i + 1 < res.rows; ++i)
    for (std::size_t j = 1; j + 1 < res.cols; ++j) {
      const bool deep_continuation = !s.stopped(i, j) && !s.stopped(i, j + 1) &&
                                     !s.stopped(i, j - 1) && !s.stopped(i + 1, j) &&
                                     !s.stopped(i - 1, j);
      if (deep_continuation && s.t_grid[i] <= 0.5)
        mx_mid = std::max(mx_mid, std::abs(res(i, j)));
      if (s.stopped(i, j)) mx_stopped = std::max(mx_stopped, std::abs(res(i, j)));
    }
  CHECK(mx_mid < 2e-3);      // measured 9.2e-4 at 200x200
  CHECK(mx_stopped < 1e-8);  // stopped nodes report v - g
}

TEST_CASE("smooth-fit gap is grid-small for the base example") {
  ValueSurface s = solve_base_200();
  SmoothFitReport rep = smooth_fit_gap(s, base_spec().discounts);
  REQUIRE(rep.t.size() == s.t_grid.size() - 2);
  REQUIRE(rep.gap.size() == rep.t.size());
  int defined = 0;
  for (std::size_t k = 0; k < rep.t.size(); ++k) defined += rep.defined[k];
  CHECK(defined > 100);          // most interior rows have a contact (136 here)
  CHECK(rep.max_gap < 0.06);     // measured 0.047 at 200x200
  CHECK(rep.max_gap > 0.0);
}

TEST_CASE("time-blend schemes agree where all are stable") {
  // Coarse belief grid keeps the explicit branch inside its stability
  // bound; the three blends then differ only by O(dt) truncation terms.
  ProblemSpec s = base_spec();
  GridSpec g;
  g.nt = 400;
  g.npi = 10;
  g.rannacher_steps = 0;
  g.theta_weight = 0.0;
  const double ve = solve_finite(s, g).value_at(0.0, 0.5);
  g.theta_weight = 0.5;
  g.rannacher_steps = 2;
  const double vc = solve_finite(s, g).value_at(0.0, 0.5);
  g.theta_weight = 1.0;
  const double vi = solve_finite(s, g).value_at(0.0, 0.5);
  CHECK(std::abs(ve - vc) < 5e-4);  // measured ~1.0e-4
  CHECK(std::abs(vi - vc) < 5e-4);
}

TEST_CASE("unstable explicit configurations are refused up front") {
  GridSpec g;
  g.nt = 200;
  g.npi = 200;
  g.theta_weight = 0.0;  // (1-2*theta)*lambda ~ 25 here
  CHECK_THROWS_AS(solve_finite(base_spec(), g), std::invalid_argument);
  g.theta_weight = 0.5;  // trapezoidal blend is unconditionally stable
  CHECK_NOTHROW(solve_finite(base_spec(), g));
}

TEST_CASE("a stalling psor solve reports time and residual") {
  GridSpec g;
  g.nt = 100;
  g.npi = 300;
  g.psor_max_iter = 1;
  g.psor_tol = 1e-14;
  try {
    solve_finite(base_spec(), g);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.time >= 0.0);
    CHECK(e.time <= 1.0);
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("solver diagnostics are populated") {
  GridSpec g;
  g.nt = 100;
  g.npi = 100;
  SolveDiagnostics diag;
  solve_finite(base_spec(), g, &diag);
  CHECK(diag.total_psor_sweeps > 0);
  CHECK(diag.max_sweeps_single_step > 0);
  CHECK(diag.omega_used > 1.0);  // spectral auto-estimate
  CHECK(diag.omega_used < 2.0);

  GridSpec fixed = g;
  fixed.psor_omega = 1.5;
  SolveDiagnostics d2;
  solve_finite(base_spec(), fixed, &d2);
  CHECK(d2.omega_used == 1.5);
}

TEST_CASE("finite horizon is clipped at a discount zero") {
  ProblemSpec s = base_spec();
  s.horizon = 3.0;
  s.discounts.c1 = DiscountModel::linear(1.0, -0.5);  // zero at t = 2
  GridSpec g;
  g.nt = 150;
  g.npi = 100;
  ValueSurface v = solve_finite(s, g);
  CHECK(v.horizon == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(v.requested_horizon == 3.0);
  CHECK(v.horizon_clipped);
  CHECK(v.t_grid.back() == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("bilinear surface lookup is node-exact and bounded") {
  ValueSurface s = solve_base_200();
  CHECK(s.value_at(s.t_grid[40], s.pi_grid[71]) ==
        doctest::Approx(s.v(40, 71)).epsilon(1e-14));
  const double mid = s.value_at(0.5 * (s.t_grid[40] + s.t_grid[41]),
                                0.5 * (s.pi_grid[71] + s.pi_grid[72]));
  double lo = s.v(40, 71), hi = s.v(40, 71);
  for (auto [i, j] : {std::pair<int, int>{40, 72}, {41, 71}, {41, 72}}) {
    lo = std::min(lo, s.v(i, j));
    hi = std::max(hi, s.v(i, j));
  }
  CHECK(mid >= lo);
  CHECK(mid <= hi);
  CHECK_THROWS_AS(s.value_at(-0.1, 0.5), std::domain_error);
  CHECK_THROWS_AS(s.value_at(1.1, 0.5), std::domain_error);
  CHECK_THROWS_AS(s.value_at(0.5, 1.2), std::domain_error);
}

TEST_CASE("solver and horizon modes must match the problem") {
  ProblemSpec inf = base_spec();
  inf.horizon.reset();
  CHECK_THROWS_AS(solve_finite(inf, GridSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(solve_infinite(base_spec(), GridSpec{}), std::invalid_argument);
}

TEST_CASE("infinite horizon converges by doubling and keeps its window") {
  ProblemSpec inf = base_spec();
  inf.horizon.reset();
  GridSpec g;
  g.nt = 100;
  g.npi = 100;
  g.max_doublings = 8;
  InfiniteSolveResult r = solve_infinite(inf, g);
  CHECK(r.converged);
  REQUIRE(r.horizons.size() == 5);  // 1, 2, 4, 8, 16
  CHECK(r.horizons.back() == 16.0);
  CHECK(r.solved_horizon == 16.0);
  CHECK(r.report_window == 1.0);
  REQUIRE(r.sup_diffs.size() == 4);
  for (std::size_t k = 1; k < r.sup_diffs.size(); ++k)
    CHECK(r.sup_diffs[k] < r.sup_diffs[k - 1]);  // geometric tail decay
  CHECK(r.sup_diffs.back() < g.horizon_tail_tol);
  CHECK(r.monotone_certificate);
  CHECK(r.min_increment >= -(1e-10 + g.psor_tol));

  // The reported surface is the [0, T0] window of the last truncation.
  CHECK(r.surface.t_grid.size() == 101);
  CHECK(r.surface.t_grid.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(r.surface.has_terminal_row);
  // Frozen at this grid; the 400x400 value is 0.206336264.
  CHECK(r.surface.value_at(0.0, 0.5) == doctest::Approx(0.206384544005).epsilon(1e-8));
}

TEST_CASE("discount curve zero ends the infinite problem at that time") {
  // c1 hits zero at t = 5/3, inside the second truncation: the doubling
  // loop clips there and declares the truncation exact.
  DiscountModel s0 = DiscountModel::exponential(0.2);
  DiscountModel s1 = DiscountModel::linear(1.0, -0.6);
  ProblemSpec spec;
  spec.signal_gap = 2.0;
  spec.low_drift = -1.0;
  spec.prior = 0.5;
  spec.discounts = embed_original(2.0, -1.0, s0, s1);
  GridSpec g;
  g.nt = 100;
  g.npi = 80;
  InfiniteSolveResult r = solve_infinite(spec, g);
  CHECK(r.converged);
  REQUIRE(r.horizons.size() == 2);
  CHECK(r.horizons[0] == 1.0);
  // floor(5/3 / 0.01) steps of dt = 0.01.
  CHECK(r.horizons[1] == doctest::Approx(1.66).epsilon(1e-12));
  CHECK(r.solved_horizon == doctest::Approx(1.66).epsilon(1e-12));
  CHECK(r.report_window == 1.0);
  CHECK(r.monotone_certificate);

  // A zero below the first truncation makes the problem plainly finite.
  ProblemSpec early = spec;
  early.discounts = embed_original(2.0, -1.0, s0, DiscountModel::linear(1.0, -2.0));
  InfiniteSolveResult re = solve_infinite(early, g);
  CHECK(re.converged);
  REQUIRE(re.horizons.size() == 1);
  CHECK(re.horizons[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(re.report_window == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(re.surface.has_terminal_row);  // the window covers the whole problem
}

TEST_CASE("infinite horizon refuses curves with an uncontrolled tail") {
  // Tabulated data with no declared limit and no zero in range: there is
  // no way to certify the tail.
  std::vector<double> t{0.0, 2.0, 5.0};
  std::vector<double> c{1.0, 0.8, 0.7};
  std::vector<double> dc{-0.15, -0.05, -0.01};
  ProblemSpec spec = base_spec();
  spec.horizon.reset();
  spec.discounts.c1 = DiscountModel::tabulated(t, c, dc);
  GridSpec g;
  g.nt = 50;
  g.npi = 50;
  CHECK_THROWS_AS(solve_infinite(spec, g), std::invalid_argument);

  // Declaring the limit restores solvability in principle (the solve
  // still cannot step past the tabulated domain, which is its own error).
  spec.discounts.c1.declare_limit_at_infinity(0.7);
  CHECK_THROWS_AS(solve_infinite(spec, g), std::domain_error);
}
