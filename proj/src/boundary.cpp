#include "dstop/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dstop {

const char* to_string(ContactMethod m) {
  switch (m) {
    case ContactMethod::interpolated: return "interpolated";
    case ContactMethod::grid_node: return "grid_node";
    case ContactMethod::gain_root: return "gain_root";
    case ContactMethod::all_continue: return "all_continue";
  }
  return "?";
}

double Boundary::interpolate(double t) const {
  if (t_grid.empty()) throw std::domain_error("boundary: empty grid");
  if (t <= t_grid.front()) return level.front();
  if (t >= horizon && has_terminal) return terminal_level;
  if (t >= t_grid.back()) {
    if (!has_terminal) return level.back();
    double span = horizon - t_grid.back();
    if (span <= 0.0) return terminal_level;
    double w = (t - t_grid.back()) / span;
    return (1.0 - w) * level.back() + w * terminal_level;
  }
  auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
  std::size_t i = static_cast<std::size_t>(it - t_grid.begin()) - 1;
  double w = (t - t_grid[i]) / (t_grid[i + 1] - t_grid[i]);
  return (1.0 - w) * level[i] + w * level[i + 1];
}

double gain_root(const DiscountPair& pair, double t) {
  double c0 = pair.c0.value(t), c1 = pair.c1.value(t);
  if (!(c0 + c1 > 0.0))
    throw std::domain_error("gain root undefined: c0 + c1 vanishes");
  return c0 / (c0 + c1);
}

double terminal_limit(const DiscountPair& pair, double T) {
  return gain_root(pair, T);
}

Boundary extract_boundary(const ValueSurface& s, const DiscountPair& pair) {
  if (s.t_grid.empty() || s.pi_grid.size() < 2)
    throw std::domain_error("extract_boundary: surface has no grid data");
  Boundary b;
  b.horizon = s.horizon;
  b.source_dpi = s.dpi();
  const std::size_t rows = s.t_grid.size(), cols = s.pi_grid.size();
  const std::size_t interior_rows = s.has_terminal_row ? rows - 1 : rows;
  b.t_grid.reserve(interior_rows);
  b.level.reserve(interior_rows);
  b.method.reserve(interior_rows);

  for (std::size_t i = 0; i < interior_rows; ++i) {
    // The stopping interval is attached to pi = 1. Deep below the gain
    // root the value and the (zero) gain can coincide within the contact
    // tolerance, so scanning bottom-up would latch onto that dead zone;
    // scan down from the top for the last free node instead.
    std::size_t j_free = 0;  // 0: every interior node is in contact
    for (std::size_t j = cols - 2; j >= 1; --j) {
      if (!s.stopped(i, j)) {
        j_free = j;
        break;
      }
    }
    double lvl;
    ContactMethod method;
    if (j_free == 0) {  // whole interior row in contact
      lvl = gain_root(pair, s.t_grid[i]);
      method = ContactMethod::gain_root;
    } else if (j_free == cols - 2) {  // no contact above: stop set empty
      lvl = 1.0;
      method = ContactMethod::all_continue;
    } else {
      const std::size_t j = j_free + 1;  // first contact node
      double d0 = s.v(i, j - 1) - s.g(i, j - 1);
      double d1 = s.v(i, j) - s.g(i, j);
      if (d0 > d1 && d0 > 0.0) {
        double w = d0 / (d0 - d1);
        lvl = s.pi_grid[j - 1] + w * (s.pi_grid[j] - s.pi_grid[j - 1]);
        lvl = std::clamp(lvl, s.pi_grid[j - 1], s.pi_grid[j]);
        method = ContactMethod::interpolated;
      } else {
        lvl = s.pi_grid[j];
        method = ContactMethod::grid_node;
      }
    }
    b.t_grid.push_back(s.t_grid[i]);
    b.level.push_back(lvl);
    b.method.push_back(method);
  }

  b.left_limit = b.level.empty() ? 0.0 : b.level.back();
  if (s.has_terminal_row) {
    // On the terminal row the surface equals the gain, so the contact set
    // starts where the gain turns positive. The gain is linear in pi on
    // each side of its root, so interpolating its sign change recovers the
    // root to rounding accuracy without consulting the discount pair.
    b.has_terminal = true;
    const std::size_t i = rows - 1;
    std::size_t j_pos = cols - 1;
    for (std::size_t j = 1; j < cols; ++j) {
      if (s.g(i, j) > 0.0) {
        j_pos = j;
        break;
      }
    }
    if (j_pos == cols - 1 && !(s.g(i, j_pos) > 0.0)) {
      b.terminal_level = 1.0;  // gain never positive at T
    } else if (j_pos + 1 < cols && s.g(i, j_pos + 1) > s.g(i, j_pos)) {
      // extend the positive linear part back to its zero
      double slope = (s.g(i, j_pos + 1) - s.g(i, j_pos)) /
                     (s.pi_grid[j_pos + 1] - s.pi_grid[j_pos]);
      double root = s.pi_grid[j_pos] - s.g(i, j_pos) / slope;
      b.terminal_level = std::clamp(root, 0.0, s.pi_grid[j_pos]);
    } else {
      b.terminal_level = s.pi_grid[j_pos];  // node-level localization
    }
  }
  return b;
}

Boundary transform_boundary(Boundary b, const DiscountPair& pair) {
  b.transformed.resize(b.level.size());
  for (std::size_t i = 0; i < b.level.size(); ++i) {
    double lvl = b.level[i];
    if (!(lvl > 0.0 && lvl < 1.0))
      throw std::domain_error("transform_boundary: level at 0 or 1 has no log odds");
    double t = b.t_grid[i];
    b.transformed[i] = std::log(pair.c1.value(t)) - std::log(pair.c0.value(t)) +
                       std::log(lvl) - std::log1p(-lvl);
  }
  b.has_transform = true;
  return b;
}

MonotonicityReport check_monotone_transformed(const Boundary& b,
                                              const ValidationReport& rep) {
  if (!b.has_transform)
    throw std::invalid_argument("check_monotone_transformed: transform the boundary first");
  MonotonicityReport out;
  out.asserted = rep.boundary_conditions_ok();
  auto slack_at = [&b](std::size_t i) {
    double lvl = std::clamp(b.level[i], 1e-9, 1.0 - 1e-9);
    if (b.source_dpi > 0.0) return 2.0 * b.source_dpi / (lvl * (1.0 - lvl));
    return 1e-9;
  };
  for (std::size_t i = 0; i + 1 < b.transformed.size(); ++i) {
    double rise = b.transformed[i + 1] - b.transformed[i] - slack_at(i);
    if (rise > 0.0) {
      ++out.violations;
      out.max_violation = std::max(out.max_violation, rise);
      if (!out.witness_t) out.witness_t = b.t_grid[i + 1];
    }
  }
  if (b.has_terminal && !b.transformed.empty()) {
    // transformed boundary ends at exactly 0 at the horizon
    double rise = 0.0 - b.transformed.back() - slack_at(b.transformed.size() - 1);
    if (rise > 0.0) {
      ++out.violations;
      out.max_violation = std::max(out.max_violation, rise);
      if (!out.witness_t) out.witness_t = b.horizon;
    }
  }
  out.passed = out.violations == 0;
  return out;
}

namespace {

/// E[gain at the horizon of the belief started at `prior` run for lag s],
/// Gauss-Hermite per mixture branch.
double terminal_expectation(const ProblemSpec& spec, double prior, double s, int hermite_n) {
  const DiscountPair& pair = spec.discounts;
  const double T = *spec.horizon;
  if (s < 1e-14) return gain(pair, T, prior);
  const QuadratureRule& gh = gauss_hermite(hermite_n);
  const double hb = spec.high_drift(), lb = spec.low_drift;
  const double sq = std::sqrt(2.0 * s);
  double acc1 = 0.0, acc0 = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    double z = sq * gh.nodes[i];
    acc1 += gh.weights[i] * gain(pair, T, pi_from_x(spec, prior, s, hb * s + z));
    acc0 += gh.weights[i] * gain(pair, T, pi_from_x(spec, prior, s, lb * s + z));
  }
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  return inv_sqrt_pi * (prior * acc1 + (1.0 - prior) * acc0);
}

/// Crossing-moment decay integrand of the early-claim identity.
struct DecayIntegrand {
  const ProblemSpec& spec;
  const DiscountPair& pair;
  const Boundary& b;
  double t;
  double prior;

  double operator()(double u) const {
    double lvl = b.interpolate(t + u);
    TransitionMoments tm = transition_moments(spec, prior, u, lvl);
    double dc0 = pair.c0.derivative(t + u);
    double dc1 = pair.c1.derivative(t + u);
    return (dc0 + dc1) * tm.mean_above - dc0 * tm.prob_above;
  }
};

double panel_gl(const DecayIntegrand& f, double lo, double hi, const QuadratureRule& gl) {
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (std::size_t m = 0; m < gl.nodes.size(); ++m)
    acc += gl.weights[m] * f(mid + half * gl.nodes[m]);
  return half * acc;
}

/// Recursive low-order/high-order comparison: bisect until the two GL
/// estimates agree. Handles the derivative spikes of steep discount
/// curves without knowing where they sit.
double adaptive_panel(const DecayIntegrand& f, double lo, double hi, double tol, int depth,
                      const QuadratureRule& coarse, const QuadratureRule& fine) {
  const double a = panel_gl(f, lo, hi, coarse);
  const double b = panel_gl(f, lo, hi, fine);
  if (std::abs(a - b) <= tol || depth >= 40) return b;
  const double mid = 0.5 * (lo + hi);
  return adaptive_panel(f, lo, mid, 0.5 * tol, depth + 1, coarse, fine) +
         adaptive_panel(f, mid, hi, 0.5 * tol, depth + 1, coarse, fine);
}

/// rhs of the early-claim identity at time t for a belief started at
/// `prior`: terminal gain expectation minus the integral of discount
/// decay against crossing moments of the boundary.
double identity_rhs(const ProblemSpec& spec, const Boundary& b, double t, double prior,
                    int quad_n, int hermite_n) {
  const DiscountPair& pair = spec.discounts;
  const double T = *spec.horizon;
  const double s = T - t;
  double rhs = terminal_expectation(spec, prior, s, hermite_n);
  if (s <= 0.0) return rhs;

  // panel edges: boundary knots strictly inside (t, T), then the horizon
  std::vector<double> edges;
  edges.push_back(0.0);
  auto it = std::upper_bound(b.t_grid.begin(), b.t_grid.end(), t + 1e-15 * (1.0 + T));
  for (; it != b.t_grid.end(); ++it) {
    double u = *it - t;
    if (u > 0.0 && u < s) edges.push_back(u);
  }
  edges.push_back(s);

  const DecayIntegrand f{spec, pair, b, t, prior};
  // scale the absolute tolerance by the total discount decay in play
  const double scale =
      std::abs(pair.c0.value(t)) + std::abs(pair.c1.value(t)) + 1.0;
  const double tol_total = 1e-9 * scale;
  const QuadratureRule& coarse = gauss_legendre(std::max(4, quad_n / 16));
  const QuadratureRule& fine = gauss_legendre(std::max(8, quad_n / 8));

  CompensatedSum integral;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    double lo = edges[k], hi = edges[k + 1];
    if (!(hi - lo > 0.0)) continue;
    integral.add(
        adaptive_panel(f, lo, hi, tol_total * (hi - lo) / s, 0, coarse, fine));
  }
  return rhs - integral.value();
}

}  // namespace

std::vector<double> integral_equation_residual(const Boundary& b, const ProblemSpec& spec,
                                               const ResidualOptions& opt) {
  check_problem(spec);
  if (spec.infinite_horizon())
    throw std::invalid_argument("integral_equation_residual: needs a finite horizon");
  if (!b.has_terminal)
    throw std::invalid_argument("integral_equation_residual: boundary lacks a terminal row");
  if (opt.quad_n < 16)
    throw std::invalid_argument("integral_equation_residual: quad_n must be >= 16");
  if (opt.hermite_n < 4)
    throw std::invalid_argument("integral_equation_residual: hermite_n must be >= 4");
  if (std::abs(b.horizon - *spec.horizon) > 1e-12 * (1.0 + *spec.horizon))
    throw std::invalid_argument("integral_equation_residual: boundary/problem horizon mismatch");
  const DiscountPair& pair = spec.discounts;

  const auto n = static_cast<std::int64_t>(b.t_grid.size());
  std::vector<double> res(static_cast<std::size_t>(n),
                          std::numeric_limits<double>::quiet_NaN());
  auto eval_one = [&](std::int64_t i) {
    double prior = b.level[static_cast<std::size_t>(i)];
    if (!(prior > 0.0 && prior < 1.0)) return;  // NaN marker stays
    double t = b.t_grid[static_cast<std::size_t>(i)];
    double lhs = prior * (pair.c0.value(t) + pair.c1.value(t)) - pair.c0.value(t);
    double rhs = identity_rhs(spec, b, t, prior, opt.quad_n, opt.hermite_n);
    res[static_cast<std::size_t>(i)] = std::abs(lhs - rhs);
  };

  if (opt.exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) num_threads(worker_count())
#endif
    for (std::int64_t i = 0; i < n; ++i) eval_one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) eval_one(i);
  }
  return res;
}

PicardResult solve_boundary_picard(const ProblemSpec& spec, const std::vector<double>& t_grid,
                                   const PicardOptions& opt) {
  check_problem(spec);
  if (spec.infinite_horizon())
    throw std::invalid_argument("solve_boundary_picard: needs a finite horizon");
  if (t_grid.size() < 2)
    throw std::invalid_argument("solve_boundary_picard: need at least 2 knots");
  const double T = *spec.horizon;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0 || t_grid[i] >= T)
      throw std::invalid_argument("solve_boundary_picard: knots must lie in [0, horizon)");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("solve_boundary_picard: knots must increase strictly");
  }
  if (opt.max_iter < 1)
    throw std::invalid_argument("solve_boundary_picard: max_iter must be >= 1");
  if (opt.tol < 0.0)
    throw std::invalid_argument("solve_boundary_picard: tol must be >= 0");
  const DiscountPair& pair = spec.discounts;

  PicardResult out;
  Boundary& b = out.boundary;
  b.t_grid = t_grid;
  b.horizon = T;
  b.has_terminal = true;
  b.terminal_level = terminal_limit(pair, T);
  b.method.assign(t_grid.size(), ContactMethod::interpolated);
  b.level.resize(t_grid.size());
  const double seed = b.terminal_level;
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    b.level[i] = std::clamp(seed, gain_root(pair, t_grid[i]), 1.0 - opt.ceiling_margin);

  const auto n = static_cast<std::int64_t>(t_grid.size());
  std::vector<double> next(b.level.size());
  for (int it = 0; it < opt.max_iter; ++it) {
    auto eval_one = [&](std::int64_t i) {
      auto k = static_cast<std::size_t>(i);
      double t = t_grid[k];
      double prior = b.level[k];
      double c0 = pair.c0.value(t), c1 = pair.c1.value(t);
      double rhs = identity_rhs(spec, b, t, prior, opt.quad_n, opt.hermite_n);
      next[k] = std::clamp((rhs + c0) / (c0 + c1), gain_root(pair, t),
                           1.0 - opt.ceiling_margin);
    };
    if (opt.exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) num_threads(worker_count())
#endif
      for (std::int64_t i = 0; i < n; ++i) eval_one(i);
    } else {
      for (std::int64_t i = 0; i < n; ++i) eval_one(i);
    }
    double sup = 0.0;
    for (std::size_t k = 0; k < b.level.size(); ++k)
      sup = std::max(sup, std::abs(next[k] - b.level[k]));
    b.level.assign(next.begin(), next.end());
    out.sup_changes.push_back(sup);
    if (opt.tol > 0.0 && sup < opt.tol) {
      out.converged = true;
      break;
    }
  }
  b.left_limit = b.level.back();
  return out;
}

}  // namespace dstop
