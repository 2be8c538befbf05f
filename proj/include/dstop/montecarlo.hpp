#pragma once

#include <cstdint>

#include "dstop/boundary.hpp"
#include "dstop/posterior.hpp"

namespace dstop {

/// Sample statistics of a stopping policy replayed on simulated paths.
struct PolicyStats {
  double mean_payoff = 0.0;
  double std_error = 0.0;  // sample SD / sqrt(n)
  std::int64_t n = 0;
  double q10 = 0.0, q50 = 0.0, q90 = 0.0;        // stop-time quantiles
  double fraction_stopped_before_deadline = 0.0;  // 0 when no deadlines sampled
  double fraction_decide_one = 0.0;
  double mean_given_high = 0.0;  // conditional on the high-drift state
  double mean_given_low = 0.0;
  std::int64_t n_high = 0;
};

struct EvalOptions {
  std::int64_t n = 200000;
  double dt = 5e-4;
  std::uint64_t seed = 12345;
  Execution exec = Execution::parallel;
};

/// Replay the original decision problem: stop at the first grid time with
/// belief >= boundary (tau = horizon if never), decide d = 1 iff the
/// stopping gain is >= 0, collect (a*theta+b) * 1{d=1} * 1{tau < deadline}.
/// Requires a deadline-interpretable discount pair.
PolicyStats evaluate_policy(const ProblemSpec& spec, const Boundary& boundary,
                            const EvalOptions& opt);

/// Same stopping rule, payoff G(tau, belief(tau)); works for any pair.
PolicyStats evaluate_pi_formulation(const ProblemSpec& spec, const Boundary& boundary,
                                    const EvalOptions& opt);

struct FormulationComparison {
  PolicyStats original;
  PolicyStats belief;
  double diff_mean = 0.0;  // original - belief, paired per path
  double diff_se = 0.0;
};

/// Both payoff formulations evaluated on one common set of paths.
FormulationComparison compare_formulations(const ProblemSpec& spec, const Boundary& boundary,
                                           const EvalOptions& opt);

struct ProbeResult {
  PolicyStats base;
  PolicyStats perturbed;
  double diff_mean = 0.0;  // perturbed - base, paired per path
  double diff_se = 0.0;
};

/// Evaluate the boundary against a vertically shifted copy (clipped to
/// stay strictly between the gain root and 1) on common random numbers.
/// Uses the original payoff when the pair is deadline-interpretable and
/// the belief payoff otherwise.
ProbeResult suboptimality_probe(const ProblemSpec& spec, const Boundary& boundary,
                                double perturbation, const EvalOptions& opt);

}  // namespace dstop
