#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dstop/discounts.hpp"
#include "dstop/math.hpp"

namespace dstop {

namespace detail {

/// Paths are dealt to fixed-size shards; each shard owns an independent
/// RNG substream, so results are identical for any worker count.
inline constexpr std::int64_t kShardSize = 1024;

std::mt19937_64 shard_rng(std::uint64_t seed, std::uint64_t shard);

}  // namespace detail

/// Belief P(high drift | signal path) given the time-t signal value x,
/// started from `prior`. Log-space evaluation; returns prior exactly at
/// t = 0 and degenerate priors (0 or 1) unchanged.
double pi_from_x(const ProblemSpec& spec, double prior, double t, double x);

/// Signal level such that the time-u belief reaches `level` exactly when
/// x crosses it (belief is increasing in x). Domain error for prior or
/// level at 0 or 1.
double threshold_in_x(const ProblemSpec& spec, double prior, double u, double level);

struct TransitionMoments {
  double prob_above = 0.0;  // P(belief at lag u >= level)
  double mean_above = 0.0;  // E[belief * 1{belief >= level}]
};

/// Closed-form crossing moments of the time-u belief started at `prior`
/// (two-branch Gaussian mixture). Levels outside (0,1) take the exact
/// limits: level <= 0 -> {1, prior}, level >= 1 -> {0, 0}.
TransitionMoments transition_moments(const ProblemSpec& spec, double prior, double u,
                                     double level);

struct PathSample {
  int theta = 0;
  std::optional<double> deadline;  // nullopt: no deadline within the horizon
  std::vector<double> t, x, pi;
};

/// Inverse-transform deadline: smallest t in [0, horizon] with
/// survival(t) <= u, bisected to 1e-10 * horizon; nullopt (probability
/// survival(horizon)) when the deadline falls beyond the horizon.
std::optional<double> sample_deadline(const DiscountModel& survival, double horizon,
                                      double u);

struct SimulationOptions {
  std::int64_t n = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  bool with_deadlines = true;
  int record_stride = 1;  // keep every k-th grid point (plus the endpoint)
  Execution exec = Execution::parallel;
};

/// Exact-increment signal paths on the dt grid with beliefs evaluated
/// pointwise (never Euler-stepped). Fixed (n, dt, seed) reproduces
/// identical paths for either execution mode. Requires a finite horizon;
/// deadline sampling requires a deadline-interpretable discount pair.
std::vector<PathSample> simulate_paths(const ProblemSpec& spec, const SimulationOptions& opt);

}  // namespace dstop
