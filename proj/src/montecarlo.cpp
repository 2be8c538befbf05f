#include "dstop/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace dstop {

namespace {

using detail::kShardSize;
using detail::shard_rng;

struct RawEval {
  std::vector<double> payoff_original;  // sized only when requested
  std::vector<double> payoff_belief;
  std::vector<double> tau;
  std::vector<std::uint8_t> decide_one;
  std::vector<std::uint8_t> before_deadline;
};

struct WalkOutput {
  std::vector<RawEval> per_boundary;
  std::vector<std::uint8_t> theta;
  bool deadlines_sampled = false;
};

void check_eval(const ProblemSpec& spec, const EvalOptions& opt) {
  check_problem(spec);
  if (spec.infinite_horizon())
    throw std::invalid_argument("policy evaluation: needs a finite horizon");
  if (opt.n < 1) throw std::invalid_argument("policy evaluation: n must be >= 1");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("policy evaluation: dt must be > 0");
}

/// Walk one common set of paths, resolving every boundary's hitting time.
/// Crossing belief >= b(t_k) is tested as signal >= threshold_in_x, so the
/// hot loop is a single compare per boundary per step.
WalkOutput walk(const ProblemSpec& spec, const std::vector<const Boundary*>& boundaries,
                const EvalOptions& opt, bool want_original, bool want_belief) {
  check_eval(spec, opt);
  const DiscountPair& pair = spec.discounts;
  const double T = *spec.horizon;
  for (const Boundary* b : boundaries) {
    if (std::abs(b->horizon - T) > 1e-12 * (1.0 + T))
      throw std::invalid_argument("policy evaluation: boundary/problem horizon mismatch");
  }
  if (want_original && !pair.deadline_interpretable)
    throw std::invalid_argument(
        "policy evaluation: pair is not deadline-interpretable; use the belief formulation");

  const auto nsteps = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(T / opt.dt - 1e-9)));
  std::vector<double> tgrid(static_cast<std::size_t>(nsteps) + 1);
  for (std::int64_t k = 0; k <= nsteps; ++k)
    tgrid[static_cast<std::size_t>(k)] = std::min(static_cast<double>(k) * opt.dt, T);
  tgrid.back() = T;

  const std::size_t nb = boundaries.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> xthr(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    xthr[b].resize(tgrid.size());
    for (std::size_t k = 0; k < tgrid.size(); ++k) {
      double lvl = boundaries[b]->interpolate(tgrid[k]);
      if (lvl >= 1.0)
        xthr[b][k] = inf;
      else if (lvl <= 0.0)
        xthr[b][k] = -inf;
      else
        xthr[b][k] = threshold_in_x(spec, spec.prior, tgrid[k], lvl);
    }
  }

  WalkOutput out;
  out.deadlines_sampled = pair.deadline_interpretable && pair.survival0 && pair.survival1;
  const auto un = static_cast<std::size_t>(opt.n);
  out.theta.assign(un, 0);
  out.per_boundary.resize(nb);
  for (RawEval& r : out.per_boundary) {
    if (want_original) r.payoff_original.assign(un, 0.0);
    if (want_belief) r.payoff_belief.assign(un, 0.0);
    r.tau.assign(un, 0.0);
    r.decide_one.assign(un, 0);
    r.before_deadline.assign(un, 0);
  }

  const double hb = spec.high_drift(), lb = spec.low_drift;
  const std::int64_t nshards = (opt.n + kShardSize - 1) / kShardSize;

  auto run_shard = [&](std::int64_t s) {
    auto rng = shard_rng(opt.seed, static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::uint8_t> done(nb);
    const std::int64_t lo = s * kShardSize, hi = std::min(opt.n, lo + kShardSize);
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const int th = unif(rng) < spec.prior ? 1 : 0;
      out.theta[ui] = static_cast<std::uint8_t>(th);
      std::optional<double> gamma;
      if (out.deadlines_sampled) {
        const DiscountModel& surv = th ? *pair.survival1 : *pair.survival0;
        gamma = sample_deadline(surv, T, unif(rng));
      }
      const double drift = th ? hb : lb;
      std::fill(done.begin(), done.end(), 0);
      std::size_t unresolved = nb;
      double x = 0.0;
      for (std::int64_t k = 0;; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const double tk = tgrid[uk];
        for (std::size_t b = 0; b < nb; ++b) {
          if (done[b] || (k != nsteps && x < xthr[b][uk])) continue;
          done[b] = 1;
          --unresolved;
          RawEval& r = out.per_boundary[b];
          const double pi = pi_from_x(spec, spec.prior, tk, x);
          const double c0 = pair.c0.value(tk), c1 = pair.c1.value(tk);
          const double val = c1 * pi - c0 * (1.0 - pi);
          const bool decide = val >= 0.0;
          const bool before = !gamma || tk < *gamma;
          r.tau[ui] = tk;
          r.decide_one[ui] = decide ? 1 : 0;
          r.before_deadline[ui] = before ? 1 : 0;
          if (want_original)
            r.payoff_original[ui] = (decide && before) ? (th ? hb : lb) : 0.0;
          if (want_belief) r.payoff_belief[ui] = std::max(val, 0.0);
        }
        if (unresolved == 0 || k == nsteps) break;
        const double h = tgrid[uk + 1] - tk;
        x += drift * h + std::sqrt(h) * gauss(rng);
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

PolicyStats reduce(const std::vector<double>& payoff, const RawEval& r,
                   const std::vector<std::uint8_t>& theta, bool deadlines) {
  PolicyStats s;
  s.n = static_cast<std::int64_t>(payoff.size());
  if (s.n == 0) return s;

  CompensatedSum sum, sum_high;
  std::int64_t decide = 0, before = 0, nh = 0;
  for (std::size_t i = 0; i < payoff.size(); ++i) {
    sum.add(payoff[i]);
    decide += r.decide_one[i];
    before += r.before_deadline[i];
    if (theta[i]) {
      sum_high.add(payoff[i]);
      ++nh;
    }
  }
  const auto dn = static_cast<double>(s.n);
  s.mean_payoff = sum.value() / dn;
  CompensatedSum ssq;
  for (double v : payoff) {
    const double d = v - s.mean_payoff;
    ssq.add(d * d);
  }
  s.std_error = s.n > 1 ? std::sqrt(ssq.value() / (dn - 1.0) / dn) : 0.0;
  s.fraction_decide_one = static_cast<double>(decide) / dn;
  s.fraction_stopped_before_deadline = deadlines ? static_cast<double>(before) / dn : 0.0;
  s.n_high = nh;
  s.mean_given_high = nh > 0 ? sum_high.value() / static_cast<double>(nh) : 0.0;
  s.mean_given_low =
      nh < s.n ? (sum.value() - sum_high.value()) / static_cast<double>(s.n - nh) : 0.0;

  std::vector<double> taus(r.tau);
  std::sort(taus.begin(), taus.end());
  auto at = [&](double q) {
    auto idx = static_cast<std::size_t>(std::llround(q * (dn - 1.0)));
    return taus[std::min(idx, taus.size() - 1)];
  };
  s.q10 = at(0.10);
  s.q50 = at(0.50);
  s.q90 = at(0.90);
  return s;
}

struct PairedDiff {
  double mean = 0.0, se = 0.0;
};

PairedDiff paired_diff(const std::vector<double>& a, const std::vector<double>& b) {
  PairedDiff d;
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return d;
  CompensatedSum sum;
  for (std::size_t i = 0; i < a.size(); ++i) sum.add(a[i] - b[i]);
  d.mean = sum.value() / n;
  CompensatedSum ssq;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i] - d.mean;
    ssq.add(e * e);
  }
  d.se = std::sqrt(ssq.value() / (n - 1.0) / n);
  return d;
}

Boundary shifted_clipped(const Boundary& b, double shift, const DiscountPair& pair) {
  constexpr double kEdge = 1e-9;
  Boundary out = b;
  for (std::size_t i = 0; i < out.level.size(); ++i) {
    const double root = gain_root(pair, out.t_grid[i]);
    out.level[i] = std::clamp(out.level[i] + shift, root + kEdge, 1.0 - kEdge);
  }
  if (out.has_terminal) {
    const double root = gain_root(pair, out.horizon);
    out.terminal_level = std::clamp(out.terminal_level + shift, root + kEdge, 1.0 - kEdge);
  }
  out.transformed.clear();
  out.has_transform = false;
  return out;
}

}  // namespace

PolicyStats evaluate_policy(const ProblemSpec& spec, const Boundary& boundary,
                            const EvalOptions& opt) {
  WalkOutput w = walk(spec, {&boundary}, opt, /*want_original=*/true, /*want_belief=*/false);
  const RawEval& r = w.per_boundary[0];
  return reduce(r.payoff_original, r, w.theta, w.deadlines_sampled);
}

PolicyStats evaluate_pi_formulation(const ProblemSpec& spec, const Boundary& boundary,
                                    const EvalOptions& opt) {
  WalkOutput w = walk(spec, {&boundary}, opt, /*want_original=*/false, /*want_belief=*/true);
  const RawEval& r = w.per_boundary[0];
  return reduce(r.payoff_belief, r, w.theta, w.deadlines_sampled);
}

FormulationComparison compare_formulations(const ProblemSpec& spec, const Boundary& boundary,
                                           const EvalOptions& opt) {
  WalkOutput w = walk(spec, {&boundary}, opt, /*want_original=*/true, /*want_belief=*/true);
  const RawEval& r = w.per_boundary[0];
  FormulationComparison cmp;
  cmp.original = reduce(r.payoff_original, r, w.theta, w.deadlines_sampled);
  cmp.belief = reduce(r.payoff_belief, r, w.theta, w.deadlines_sampled);
  PairedDiff d = paired_diff(r.payoff_original, r.payoff_belief);
  cmp.diff_mean = d.mean;
  cmp.diff_se = d.se;
  return cmp;
}

ProbeResult suboptimality_probe(const ProblemSpec& spec, const Boundary& boundary,
                                double perturbation, const EvalOptions& opt) {
  const Boundary perturbed = shifted_clipped(boundary, perturbation, spec.discounts);
  const bool original = spec.discounts.deadline_interpretable;
  WalkOutput w = walk(spec, {&boundary, &perturbed}, opt, original, !original);
  auto payoff = [&](std::size_t b) -> const std::vector<double>& {
    return original ? w.per_boundary[b].payoff_original : w.per_boundary[b].payoff_belief;
  };
  ProbeResult pr;
  pr.base = reduce(payoff(0), w.per_boundary[0], w.theta, w.deadlines_sampled);
  pr.perturbed = reduce(payoff(1), w.per_boundary[1], w.theta, w.deadlines_sampled);
  PairedDiff d = paired_diff(payoff(1), payoff(0));
  pr.diff_mean = d.mean;
  pr.diff_se = d.se;
  return pr;
}

}  // namespace dstop
