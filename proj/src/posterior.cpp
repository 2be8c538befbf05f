#include "dstop/posterior.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dstop {

double pi_from_x(const ProblemSpec& spec, double prior, double t, double x) {
  if (!(prior >= 0.0 && prior <= 1.0))
    throw std::domain_error("pi_from_x: prior must lie in [0,1]");
  if (t < 0.0) throw std::domain_error("pi_from_x: negative time");
  if (prior == 0.0 || prior == 1.0 || t == 0.0) return prior;
  const double hb = spec.high_drift(), lb = spec.low_drift;
  // log-likelihood exponents of the two drift hypotheses
  double e1 = std::log(prior) + hb * x - 0.5 * hb * hb * t;
  double e0 = std::log1p(-prior) + lb * x - 0.5 * lb * lb * t;
  double d = e0 - e1;
  if (d >= 0.0) {
    double r = std::exp(-d);
    return r / (1.0 + r);
  }
  return 1.0 / (1.0 + std::exp(d));
}

double threshold_in_x(const ProblemSpec& spec, double prior, double u, double level) {
  if (!(prior > 0.0 && prior < 1.0))
    throw std::domain_error("threshold_in_x: prior must lie in (0,1)");
  if (!(level > 0.0 && level < 1.0))
    throw std::domain_error("threshold_in_x: level must lie in (0,1)");
  if (u < 0.0) throw std::domain_error("threshold_in_x: negative lag");
  const double a = spec.signal_gap, b = spec.low_drift;
  double logit_gap = std::log(level / (1.0 - level)) - std::log(prior / (1.0 - prior));
  return (logit_gap + 0.5 * a * (a + 2.0 * b) * u) / a;
}

TransitionMoments transition_moments(const ProblemSpec& spec, double prior, double u,
                                     double level) {
  if (!(prior > 0.0 && prior < 1.0))
    throw std::domain_error("transition_moments: prior must lie in (0,1)");
  if (!(u > 0.0)) throw std::domain_error("transition_moments: lag must be > 0");
  if (level <= 0.0) return {1.0, prior};
  if (level >= 1.0) return {0.0, 0.0};
  const double hb = spec.high_drift(), lb = spec.low_drift;
  double xb = threshold_in_x(spec, prior, u, level);
  double sq = std::sqrt(u);
  double tail_high = normal_sf((xb - hb * u) / sq);
  double tail_low = normal_sf((xb - lb * u) / sq);
  TransitionMoments m;
  m.mean_above = prior * tail_high;
  m.prob_above = prior * tail_high + (1.0 - prior) * tail_low;
  return m;
}

std::optional<double> sample_deadline(const DiscountModel& survival, double horizon,
                                      double u) {
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_deadline: horizon must be > 0");
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("sample_deadline: u must lie in [0,1]");
  if (u < survival.value(horizon)) return std::nullopt;
  if (u >= survival.value(0.0)) return 0.0;
  // survival(lo) > u >= survival(hi); smallest such t by bisection
  double lo = 0.0, hi = horizon;
  const double tol = 1e-10 * horizon;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    (survival.value(mid) > u ? lo : hi) = mid;
  }
  return hi;
}

namespace detail {

std::mt19937_64 shard_rng(std::uint64_t seed, std::uint64_t shard) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shard), static_cast<std::uint32_t>(shard >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

using detail::kShardSize;
using detail::shard_rng;

std::vector<PathSample> simulate_paths(const ProblemSpec& spec, const SimulationOptions& opt) {
  check_problem(spec);
  if (spec.infinite_horizon())
    throw std::invalid_argument("simulate_paths: needs a finite horizon");
  if (!(opt.n > 0)) throw std::invalid_argument("simulate_paths: n must be > 0");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("simulate_paths: dt must be > 0");
  if (opt.record_stride < 1)
    throw std::invalid_argument("simulate_paths: record_stride must be >= 1");
  if (opt.with_deadlines && !spec.discounts.deadline_interpretable)
    throw std::invalid_argument(
        "simulate_paths: discount pair is not deadline-interpretable; "
        "disable deadline sampling to simulate beliefs only");

  const double T = *spec.horizon;
  const auto nsteps = static_cast<std::int64_t>(std::ceil(T / opt.dt - 1e-9));
  const double hb = spec.high_drift(), lb = spec.low_drift;

  std::vector<PathSample> out(static_cast<std::size_t>(opt.n));
  const std::int64_t nshards = (opt.n + kShardSize - 1) / kShardSize;

  auto run_shard = [&](std::int64_t s) {
    auto rng = shard_rng(opt.seed, static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::int64_t lo = s * kShardSize, hi = std::min(opt.n, lo + kShardSize);
    for (std::int64_t i = lo; i < hi; ++i) {
      PathSample& ps = out[static_cast<std::size_t>(i)];
      ps.theta = unif(rng) < spec.prior ? 1 : 0;
      if (opt.with_deadlines) {
        const DiscountModel& surv =
            ps.theta ? *spec.discounts.survival1 : *spec.discounts.survival0;
        ps.deadline = sample_deadline(surv, T, unif(rng));
      }
      const double drift = ps.theta ? hb : lb;
      double t = 0.0, x = 0.0;
      auto record = [&](double tt, double xx) {
        ps.t.push_back(tt);
        ps.x.push_back(xx);
        ps.pi.push_back(pi_from_x(spec, spec.prior, tt, xx));
      };
      record(0.0, 0.0);
      for (std::int64_t k = 1; k <= nsteps; ++k) {
        double tn = std::min(static_cast<double>(k) * opt.dt, T);
        double h = tn - t;
        x += drift * h + std::sqrt(h) * gauss(rng);
        t = tn;
        if (k % opt.record_stride == 0 || k == nsteps) record(t, x);
      }
    }
  };

  if (opt.exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
#endif
    for (std::int64_t s = 0; s < nshards; ++s) run_shard(s);
  } else {
    for (std::int64_t s = 0; s < nshards; ++s) run_shard(s);
  }
  return out;
}

}  // namespace dstop
