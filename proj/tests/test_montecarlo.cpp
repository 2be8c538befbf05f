#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dstop/examples_catalog.hpp"
#include "dstop/montecarlo.hpp"

using namespace dstop;

namespace {

ProblemSpec base_spec() { return find_example("exp-base")->spec; }

const ValueSurface& base_surface() {
  static const ValueSurface s = [] {
    GridSpec g;
    g.nt = 400;
    g.npi = 400;
    return solve_finite(base_spec(), g);
  }();
  return s;
}

const Boundary& base_boundary() {
  static const Boundary b = extract_boundary(base_surface(), base_spec().discounts);
  return b;
}

/// A constant-threshold policy: stop when the belief first reaches `level`.
Boundary flat_boundary(double level, double horizon) {
  Boundary b;
  b.t_grid = {0.0, 0.5 * horizon};
  b.level = {level, level};
  b.method = {ContactMethod::interpolated, ContactMethod::interpolated};
  b.horizon = horizon;
  b.has_terminal = true;
  b.terminal_level = level;
  b.left_limit = level;
  b.source_dpi = 0.0;
  return b;
}

}  // namespace

TEST_CASE("a policy that stops at once pays the immediate gain exactly") {
  ProblemSpec s = base_spec();
  s.prior = 0.8;
  const Boundary b = flat_boundary(0.1, 1.0);  // prior already above: tau = 0
  EvalOptions opt;
  opt.n = 20000;
  opt.dt = 2e-3;

  PolicyStats ps = evaluate_policy(s, b, opt);
  CHECK(ps.n == 20000);
  // Payoff per path is exactly the claimed drift: +1 on high, -1 on low.
  CHECK(ps.mean_given_high == 1.0);
  CHECK(ps.mean_given_low == -1.0);
  CHECK(ps.fraction_decide_one == 1.0);  // gain(0, 0.8) = 0.6 >= 0
  CHECK(ps.fraction_stopped_before_deadline == 1.0);
  CHECK(ps.q10 == 0.0);
  CHECK(ps.q50 == 0.0);
  CHECK(ps.q90 == 0.0);
  // Mean is the +/-1 coin at the prior: 2 * 0.8 - 1 = 0.6 up to sampling noise.
  CHECK(std::abs(ps.mean_payoff - 0.6) <= 4.0 * ps.std_error);

  // Belief formulation: every path collects G(0, 0.8) = 0.6 deterministically.
  PolicyStats pb = evaluate_pi_formulation(s, b, opt);
  CHECK(pb.mean_payoff == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(pb.std_error == 0.0);
}

TEST_CASE("a zero threshold at an even prior is a worthless coin flip") {
  const Boundary b = flat_boundary(0.0, 1.0);
  EvalOptions opt;
  opt.n = 10000;
  opt.dt = 2e-3;
  // Original payoff is +/-1 at tau = 0: mean 0 with unit variance.
  PolicyStats ps = evaluate_policy(base_spec(), b, opt);
  CHECK(std::abs(ps.mean_payoff) <= 4.5 / std::sqrt(10000.0));
  // Belief payoff is G(0, 0.5) = 0 on the nose, every path.
  PolicyStats pb = evaluate_pi_formulation(base_spec(), b, opt);
  CHECK(pb.mean_payoff == 0.0);
  CHECK(pb.std_error == 0.0);
}

TEST_CASE("replaying the solved boundary recovers the dynamic-programming value") {
  EvalOptions opt;
  opt.n = 50000;
  opt.dt = 5e-4;
  PolicyStats ps = evaluate_policy(base_spec(), base_boundary(), opt);
  const double v = base_surface().value_at(0.0, 0.5);
  // Monte Carlo noise plus a small slack for time discretization of the
  // crossing rule and the finite belief grid behind the boundary.
  CHECK(std::abs(ps.mean_payoff - v) <= 4.0 * ps.std_error + 3e-3);
  CHECK(ps.std_error < 5e-3);
  CHECK(ps.n == opt.n);

  // Stop-time quantiles are ordered and live in the horizon.
  CHECK(ps.q10 <= ps.q50);
  CHECK(ps.q50 <= ps.q90);
  CHECK(ps.q90 <= 1.0);
  CHECK(ps.q10 >= 0.0);
  CHECK(ps.fraction_decide_one >= 0.0);
  CHECK(ps.fraction_decide_one <= 1.0);
  CHECK(ps.fraction_stopped_before_deadline > 0.0);
  CHECK(ps.fraction_stopped_before_deadline <= 1.0);

  // State-count honesty: theta draws follow the prior.
  CHECK(std::abs(static_cast<double>(ps.n_high) - 25000.0) < 4.0 * std::sqrt(50000.0 * 0.25));
  // Conditional means recombine to the overall mean exactly.
  const double nh = static_cast<double>(ps.n_high);
  const double nl = static_cast<double>(ps.n - ps.n_high);
  const double recombined = (nh * ps.mean_given_high + nl * ps.mean_given_low) /
                            static_cast<double>(ps.n);
  CHECK(recombined == doctest::Approx(ps.mean_payoff).epsilon(1e-12));
  // Claiming pays off more often when the drift is actually high.
  CHECK(ps.mean_given_high > ps.mean_payoff);
  CHECK(ps.mean_given_low < ps.mean_payoff);
}

TEST_CASE("no feasible threshold policy beats the solved value") {
  EvalOptions opt;
  opt.n = 20000;
  opt.dt = 1e-3;
  const double v = base_surface().value_at(0.0, 0.5);
  const double grid_slack = 2e-3;

  PolicyStats best = evaluate_policy(base_spec(), base_boundary(), opt);
  CHECK(best.mean_payoff <= v + 3.5 * best.std_error + grid_slack);

  for (double level : {0.55, 0.70, 0.85, 0.95}) {
    PolicyStats ps = evaluate_policy(base_spec(), flat_boundary(level, 1.0), opt);
    CHECK(ps.mean_payoff <= v + 3.5 * ps.std_error + grid_slack);
  }

  // Never stopping early: forced decision at the horizon only.
  PolicyStats hold = evaluate_policy(base_spec(), flat_boundary(1.0, 1.0), opt);
  CHECK(hold.mean_payoff <= v + 3.5 * hold.std_error + grid_slack);
  CHECK(hold.q10 == 1.0);
  CHECK(hold.q50 == 1.0);
  CHECK(hold.q90 == 1.0);
  // Fraction surviving to the horizon matches the deadline mixture.
  const double survive = 0.5 * std::exp(-1.0) + 0.5 * std::exp(-0.4);
  CHECK(std::abs(hold.fraction_stopped_before_deadline - survive) <
        4.0 * std::sqrt(0.25 / 20000.0));
  // Waiting out the whole horizon is clearly worse than acting on beliefs.
  CHECK(hold.mean_payoff <
        best.mean_payoff - 3.0 * (hold.std_error + best.std_error));
}

TEST_CASE("claimed-drift and belief payoffs agree path by path in expectation") {
  EvalOptions opt;
  opt.n = 30000;
  opt.dt = 1e-3;
  FormulationComparison cmp = compare_formulations(base_spec(), base_boundary(), opt);
  CHECK(cmp.original.n == opt.n);
  CHECK(cmp.belief.n == opt.n);
  // The conditional-expectation identity makes the paired mean difference
  // statistically zero even though individual paths differ.
  CHECK(cmp.diff_se > 0.0);
  CHECK(std::abs(cmp.diff_mean) <= 3.5 * cmp.diff_se);
  // Paired difference of means is the difference of paired means.
  CHECK(cmp.diff_mean ==
        doctest::Approx(cmp.original.mean_payoff - cmp.belief.mean_payoff).epsilon(1e-10));
  // Both formulations replay the same stopping rule on the same paths.
  CHECK(cmp.original.q10 == cmp.belief.q10);
  CHECK(cmp.original.q50 == cmp.belief.q50);
  CHECK(cmp.original.q90 == cmp.belief.q90);
  CHECK(cmp.original.n_high == cmp.belief.n_high);
  CHECK(cmp.original.fraction_decide_one == cmp.belief.fraction_decide_one);
}

TEST_CASE("both formulations see identical paths under one seed") {
  EvalOptions opt;
  opt.n = 8000;
  opt.dt = 2e-3;
  PolicyStats po = evaluate_policy(base_spec(), base_boundary(), opt);
  PolicyStats pb = evaluate_pi_formulation(base_spec(), base_boundary(), opt);
  CHECK(po.q10 == pb.q10);
  CHECK(po.q50 == pb.q50);
  CHECK(po.q90 == pb.q90);
  CHECK(po.n_high == pb.n_high);
  CHECK(po.fraction_decide_one == pb.fraction_decide_one);
}

TEST_CASE("run results are reproducible and seed-sensitive") {
  const Boundary b = flat_boundary(0.7, 1.0);
  EvalOptions opt;
  opt.n = 8000;
  opt.dt = 2e-3;

  opt.exec = Execution::serial;
  PolicyStats serial = evaluate_policy(base_spec(), b, opt);
  opt.exec = Execution::parallel;
  PolicyStats parallel = evaluate_policy(base_spec(), b, opt);
  CHECK(serial.mean_payoff == parallel.mean_payoff);
  CHECK(serial.std_error == parallel.std_error);
  CHECK(serial.q10 == parallel.q10);
  CHECK(serial.q50 == parallel.q50);
  CHECK(serial.q90 == parallel.q90);
  CHECK(serial.n_high == parallel.n_high);
  CHECK(serial.fraction_decide_one == parallel.fraction_decide_one);
  CHECK(serial.fraction_stopped_before_deadline ==
        parallel.fraction_stopped_before_deadline);

  opt.seed = 999;
  PolicyStats other = evaluate_policy(base_spec(), b, opt);
  CHECK(other.mean_payoff != parallel.mean_payoff);
}

TEST_CASE("lowering the boundary a lot is measurably suboptimal") {
  EvalOptions opt;
  opt.n = 30000;
  opt.dt = 1e-3;
  ProbeResult pr = suboptimality_probe(base_spec(), base_boundary(), -0.2, opt);
  CHECK(pr.base.n == opt.n);
  CHECK(pr.perturbed.n == opt.n);
  CHECK(pr.diff_mean < 0.0);
  CHECK(pr.diff_mean < -3.0 * pr.diff_se);  // significant, not noise
  // Paired difference reconciles with the two marginal means.
  CHECK(pr.diff_mean ==
        doctest::Approx(pr.perturbed.mean_payoff - pr.base.mean_payoff).epsilon(1e-10));

  // A small upward shift must not win either (within noise).
  ProbeResult up = suboptimality_probe(base_spec(), base_boundary(), 0.05, opt);
  CHECK(up.diff_mean <= 3.5 * up.diff_se);

  // The probe is deterministic for fixed options.
  ProbeResult again = suboptimality_probe(base_spec(), base_boundary(), -0.2, opt);
  CHECK(again.diff_mean == pr.diff_mean);
  CHECK(again.diff_se == pr.diff_se);
}

TEST_CASE("pairs without a deadline reading fall back to the belief payoff") {
  const ExampleRow* row = find_example("linear-growth-penalty");
  REQUIRE(row != nullptr);
  REQUIRE_FALSE(row->spec.discounts.deadline_interpretable);

  GridSpec g;
  g.nt = 100;
  g.npi = 100;
  ValueSurface surf = solve_finite(row->spec, g);
  Boundary b = extract_boundary(surf, row->spec.discounts);
  EvalOptions opt;
  opt.n = 5000;
  opt.dt = 2e-3;

  CHECK_THROWS_AS(evaluate_policy(row->spec, b, opt), std::invalid_argument);

  PolicyStats ps = evaluate_pi_formulation(row->spec, b, opt);
  CHECK(std::isfinite(ps.mean_payoff));
  CHECK(ps.mean_payoff >= 0.0);  // belief payoff is clamped at zero
  CHECK(ps.fraction_stopped_before_deadline == 0.0);  // no deadlines sampled

  // The probe silently uses the belief formulation for such pairs.
  ProbeResult pr = suboptimality_probe(row->spec, b, -0.2, opt);
  CHECK(pr.diff_mean <= 3.5 * pr.diff_se);
  CHECK(std::isfinite(pr.diff_se));
}

TEST_CASE("policy evaluation validates its inputs") {
  const Boundary b = flat_boundary(0.7, 1.0);
  EvalOptions opt;
  opt.n = 100;
  opt.dt = 2e-3;

  ProblemSpec inf = base_spec();
  inf.horizon.reset();
  Boundary binf = b;
  CHECK_THROWS_AS(evaluate_policy(inf, binf, opt), std::invalid_argument);

  EvalOptions bad = opt;
  bad.n = 0;
  CHECK_THROWS_AS(evaluate_policy(base_spec(), b, bad), std::invalid_argument);
  bad = opt;
  bad.dt = 0.0;
  CHECK_THROWS_AS(evaluate_policy(base_spec(), b, bad), std::invalid_argument);
  bad = opt;
  bad.dt = -1e-3;
  CHECK_THROWS_AS(evaluate_pi_formulation(base_spec(), b, bad), std::invalid_argument);

  const Boundary wrong = flat_boundary(0.7, 2.0);
  CHECK_THROWS_AS(evaluate_policy(base_spec(), wrong, opt), std::invalid_argument);
  CHECK_THROWS_AS(compare_formulations(base_spec(), wrong, opt), std::invalid_argument);
  CHECK_THROWS_AS(suboptimality_probe(base_spec(), wrong, 0.05, opt), std::invalid_argument);
}
