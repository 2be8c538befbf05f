#include "dstop/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace dstop {

void check_grid(const GridSpec& grid) {
  if (grid.nt < 1) throw std::invalid_argument("grid: nt must be >= 1");
  if (grid.npi < 3) throw std::invalid_argument("grid: npi must be >= 3");
  if (!(grid.theta_weight >= 0.0 && grid.theta_weight <= 1.0))
    throw std::invalid_argument("grid: theta_weight must lie in [0,1]");
  if (!(grid.psor_tol > 0.0)) throw std::invalid_argument("grid: psor_tol must be > 0");
  if (grid.psor_max_iter < 1) throw std::invalid_argument("grid: psor_max_iter must be >= 1");
  if (!(grid.psor_omega >= 0.0 && grid.psor_omega < 2.0))
    throw std::invalid_argument("grid: psor_omega must lie in [0,2) (0 = auto)");
  if (grid.rannacher_steps < 0)
    throw std::invalid_argument("grid: rannacher_steps must be >= 0");
  if (!(grid.horizon_tail_tol > 0.0))
    throw std::invalid_argument("grid: horizon_tail_tol must be > 0");
  if (grid.max_doublings < 0) throw std::invalid_argument("grid: max_doublings must be >= 0");
  if (!(grid.initial_horizon > 0.0))
    throw std::invalid_argument("grid: initial_horizon must be > 0");
}

double gain(const DiscountPair& pair, double t, double pi) {
  double raw = pair.c1.value(t) * pi - pair.c0.value(t) * (1.0 - pi);
  return raw > 0.0 ? raw : 0.0;
}

double ValueSurface::value_at(double t, double pi) const {
  if (t < t_grid.front() - 1e-12 || t > t_grid.back() + 1e-12)
    throw std::domain_error("surface: t outside grid");
  if (pi < -1e-12 || pi > 1.0 + 1e-12) throw std::domain_error("surface: pi outside [0,1]");
  t = std::clamp(t, t_grid.front(), t_grid.back());
  pi = std::clamp(pi, 0.0, 1.0);
  double ft = (t - t_grid.front()) / dt();
  double fp = pi / dpi();
  std::size_t i = std::min(static_cast<std::size_t>(ft), t_grid.size() - 2);
  std::size_t j = std::min(static_cast<std::size_t>(fp), pi_grid.size() - 2);
  double wt = ft - static_cast<double>(i);
  double wp = fp - static_cast<double>(j);
  return (1 - wt) * ((1 - wp) * v(i, j) + wp * v(i, j + 1)) +
         wt * ((1 - wp) * v(i + 1, j) + wp * v(i + 1, j + 1));
}

namespace {

struct StepWorkspace {
  std::vector<double> alpha_blend;  // theta * dt * D_j / dpi^2
  std::vector<double> alpha_full;   // dt * D_j / dpi^2 (startup steps)
  std::vector<double> expl_coeff;   // (1-theta) * dt * D_j / dpi^2
  std::vector<double> rhs;
  double omega = 1.5;
};

double auto_omega(const std::vector<double>& alpha, int npi) {
  double mu = 0.0;
  for (int j = 1; j <= npi; ++j) {
    double a = alpha[j];
    mu = std::max(mu, 2.0 * a / (1.0 + 2.0 * a));
  }
  mu *= std::cos(std::numbers::pi / (npi + 1));
  double omega = 2.0 / (1.0 + std::sqrt(std::max(1.0 - mu * mu, 0.0)));
  return std::clamp(omega, 1.0, 1.97);
}

/// One implicit solve (I - L) v = rhs with obstacle g: projected SOR,
/// downward sweep from the reward-side Dirichlet node. Returns sweep
/// count; throws SolverError when the update never falls below tol.
int psor_solve(std::vector<double>& v, const std::vector<double>& rhs,
               const std::vector<double>& alpha, const double* g, int npi,
               double omega, double tol, int max_iter, double t_node) {
  double max_change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    max_change = 0.0;
    for (int j = npi; j >= 1; --j) {
      double a = alpha[j];
      double gs = (rhs[j] + a * (v[j - 1] + v[j + 1])) / (1.0 + 2.0 * a);
      double cand = v[j] + omega * (gs - v[j]);
      if (cand < g[j]) cand = g[j];
      double change = std::abs(cand - v[j]);
      if (change > max_change) max_change = change;
      v[j] = cand;
    }
    if (max_change < tol) return it;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "PSOR stalled at t=%.8g (last update %.3g, max_iter=%d)",
                t_node, max_change, max_iter);
  throw SolverError(buf, t_node, max_change);
}

/// Backward induction over the full horizon, storing only the rows with
/// t <= store_window (pass the horizon itself to keep everything). Rows
/// above the window are advanced through rolling buffers with identical
/// arithmetic, so a windowed solve reproduces the stored prefix of a
/// full solve bit for bit while keeping memory proportional to the
/// window.
ValueSurface solve_core(const ProblemSpec& spec, const GridSpec& grid,
                        SolveDiagnostics* diag, double store_window) {
  check_problem(spec);
  check_grid(grid);
  if (spec.infinite_horizon())
    throw std::invalid_argument("solve_finite: needs a finite horizon");
  const DiscountPair& pair = spec.discounts;

  ValueSurface s;
  s.requested_horizon = *spec.horizon;
  s.horizon = clipped_horizon(pair, *spec.horizon);
  s.horizon_clipped = s.horizon < *spec.horizon - 1e-15 * *spec.horizon;
  const double T = s.horizon;
  const int nt = grid.nt, npi = grid.npi;
  const std::size_t cols = static_cast<std::size_t>(npi) + 2;
  const std::size_t rows = static_cast<std::size_t>(nt) + 1;

  // rows i < kept are stored; the rest only pass through the recursion
  std::size_t kept = rows;
  if (store_window < T) {
    kept = 0;
    while (kept < rows && T * static_cast<double>(kept) / nt <=
                              store_window + 1e-12 * (1.0 + T))
      ++kept;
    kept = std::max<std::size_t>(kept, 1);
  }
  const bool full = kept == rows;

  s.t_grid.resize(kept);
  for (std::size_t i = 0; i < kept; ++i) s.t_grid[i] = T * static_cast<double>(i) / nt;
  s.pi_grid.resize(cols);
  for (std::size_t j = 0; j < cols; ++j)
    s.pi_grid[j] = static_cast<double>(j) / (npi + 1);
  s.v = Matrix(kept, cols);
  s.g = Matrix(kept, cols);
  s.stop.assign(kept * cols, 0);
  s.contact_tol = std::max(grid.psor_tol, 1e-10);
  s.has_terminal_row = full;
  if (!full) s.horizon = s.t_grid.back();  // surface covers the window only

  std::vector<double> gscratch(cols);
  auto fill_gain_row = [&](std::size_t i, double* out) {
    double t = T * static_cast<double>(i) / nt;
    double c0 = pair.c0.value(t);
    double c1 = pair.c1.value(t);
    for (std::size_t j = 0; j < cols; ++j) {
      double raw = c1 * s.pi_grid[j] - c0 * (1.0 - s.pi_grid[j]);
      out[j] = raw > 0.0 ? raw : 0.0;
    }
  };
  for (std::size_t i = 0; i < kept; ++i) fill_gain_row(i, &s.g.data[i * cols]);

  const double dt = T / nt;
  const double dpi = 1.0 / (npi + 1);
  const double half_a2 = 0.5 * spec.signal_gap * spec.signal_gap;
  const double theta = grid.theta_weight;

  StepWorkspace ws;
  ws.alpha_blend.assign(cols, 0.0);
  ws.alpha_full.assign(cols, 0.0);
  ws.expl_coeff.assign(cols, 0.0);
  ws.rhs.assign(cols, 0.0);
  for (int j = 1; j <= npi; ++j) {
    double p = s.pi_grid[j];
    double D = half_a2 * p * p * (1.0 - p) * (1.0 - p);
    double lam = dt * D / (dpi * dpi);
    ws.alpha_blend[j] = theta * lam;
    ws.alpha_full[j] = lam;
    ws.expl_coeff[j] = (1.0 - theta) * lam;
  }
  if (theta < 0.5) {
    // Below the trapezoidal blend the scheme is only conditionally
    // stable: (1 - 2 theta) * dt * max(D) / dpi^2 <= 1/2. Running past
    // the bound silently fills the surface with garbage, so refuse.
    double max_lam = 0.0;
    for (int j = 1; j <= npi; ++j) max_lam = std::max(max_lam, ws.alpha_full[j]);
    const double cfl = (1.0 - 2.0 * theta) * max_lam;
    if (cfl > 0.5 + 1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "theta_weight %.3g is unstable at this grid: "
                    "(1-2*theta)*dt*max(D)/dpi^2 = %.3g > 0.5; raise "
                    "theta_weight or refine the time step",
                    theta, cfl);
      throw std::invalid_argument(buf);
    }
  }
  ws.omega = grid.psor_omega > 0.0 ? grid.psor_omega
                                   : auto_omega(theta > 0.0 ? ws.alpha_blend : ws.alpha_full,
                                                npi);
  if (diag) diag->omega_used = ws.omega;

  // terminal row: value equals gain
  const double* gterm;
  if (full) {
    gterm = &s.g.data[static_cast<std::size_t>(nt) * cols];
  } else {
    fill_gain_row(static_cast<std::size_t>(nt), gscratch.data());
    gterm = gscratch.data();
  }
  if (full) {
    for (std::size_t j = 0; j < cols; ++j) {
      s.v(nt, j) = gterm[j];
      s.stop[static_cast<std::size_t>(nt) * cols + j] = 1;
    }
  }

  std::vector<double> vrow(cols), vprev(cols);
  for (std::size_t j = 0; j < cols; ++j) vprev[j] = gterm[j];

  for (int i = nt - 1; i >= 0; --i) {
    const double t_node = T * static_cast<double>(i) / nt;
    const bool startup = (nt - 1 - i) < grid.rannacher_steps && theta < 1.0 && theta > 0.0;
    const bool implicit = startup || theta > 0.0;
    const std::vector<double>& alpha = (startup || theta == 0.0) ? ws.alpha_full
                                                                 : ws.alpha_blend;
    const bool has_expl = !startup && theta < 1.0;

    // Dirichlet data for the new row
    vrow = vprev;  // warm start
    vrow[0] = 0.0;
    vrow[cols - 1] = pair.c1.value(t_node);

    for (int j = 1; j <= npi; ++j) {
      double rhs = vprev[j];
      if (has_expl) {
        double lam = ws.expl_coeff[j];
        rhs += lam * (vprev[j + 1] - 2.0 * vprev[j] + vprev[j - 1]);
      }
      ws.rhs[j] = rhs;
    }
    const double* grow;
    if (static_cast<std::size_t>(i) < kept) {
      grow = &s.g.data[static_cast<std::size_t>(i) * cols];
    } else {
      fill_gain_row(static_cast<std::size_t>(i), gscratch.data());
      grow = gscratch.data();
    }
    if (!implicit) {
      for (int j = 1; j <= npi; ++j) vrow[j] = std::max(ws.rhs[j], grow[j]);
    } else {
      // fold the new row's Dirichlet values into the system edges
      ws.rhs[1] += alpha[1] * vrow[0];
      ws.rhs[npi] += alpha[npi] * vrow[cols - 1];
      // the edge-folded terms enter through neighbors; zero them locally
      double save_lo = vrow[0], save_hi = vrow[cols - 1];
      vrow[0] = 0.0;
      vrow[cols - 1] = 0.0;
      for (int j = 1; j <= npi; ++j) vrow[j] = std::max(vrow[j], grow[j]);
      int sweeps = psor_solve(vrow, ws.rhs, alpha, grow, npi, ws.omega, grid.psor_tol,
                              grid.psor_max_iter, t_node);
      if (diag) {
        diag->total_psor_sweeps += sweeps;
        diag->max_sweeps_single_step = std::max(diag->max_sweeps_single_step, sweeps);
      }
      vrow[0] = save_lo;
      vrow[cols - 1] = save_hi;
    }

    if (static_cast<std::size_t>(i) < kept) {
      for (std::size_t j = 0; j < cols; ++j) {
        s.v(i, j) = vrow[j];
        double slack = s.contact_tol * (1.0 + std::abs(grow[j]));
        s.stop[static_cast<std::size_t>(i) * cols + j] =
            (vrow[j] - grow[j] <= slack) ? 1 : 0;
      }
    }
    vprev = vrow;
  }
  return s;
}

}  // namespace

ValueSurface solve_finite(const ProblemSpec& spec, const GridSpec& grid,
                          SolveDiagnostics* diag) {
  return solve_core(spec, grid, diag,
                    std::numeric_limits<double>::infinity());
}

InfiniteSolveResult solve_infinite(const ProblemSpec& spec, const GridSpec& grid,
                                   SolveDiagnostics* diag) {
  check_problem(spec);
  check_grid(grid);
  if (!spec.infinite_horizon())
    throw std::invalid_argument("solve_infinite: problem has a finite horizon");
  const DiscountPair& pair = spec.discounts;

  InfiniteSolveResult res;
  const double T0 = grid.initial_horizon;
  const double dt0 = T0 / grid.nt;

  // Every curve must have a controlled tail: either a limit at infinity
  // or a zero inside the deepest truncation we are prepared to try (a
  // structural zero ends the problem, so no limit is needed then).
  const double T_deep = T0 * std::ldexp(1.0, grid.max_doublings);
  auto tail_ok = [&](const DiscountModel& c) {
    return c.limit_at_infinity().has_value() ||
           first_nonpositive(c, std::min(T_deep, c.domain_end())).has_value();
  };
  if (!tail_ok(pair.c0) || !tail_ok(pair.c1))
    throw std::invalid_argument(
        "solve_infinite: each discount curve needs a limit at infinity or "
        "a zero within the deepest truncation horizon");

  // Each truncation is solved backward from its own horizon but only the
  // retained window [0, T0] is stored; with dt fixed the window rows are
  // the same grid nodes in every truncation, so both the convergence
  // measure and the dominance certificate compare node for node. Memory
  // stays proportional to the window however many doublings run.
  //
  // A curve hitting zero ends the problem there, BUT the zero is only
  // looked for inside the current truncation horizon: exponential-type
  // curves underflow to an exact 0.0 around t ~ 7e2, and treating that
  // as a structural deadline would balloon the truncation long after
  // the tail has already converged.
  res.report_window = T0;
  ValueSurface prev;
  for (int n = 0; n <= grid.max_doublings; ++n) {
    const double Tn = T0 * std::ldexp(1.0, n);
    double tz = Tn;
    bool clipped = false;
    const double scan0 = std::min(Tn, pair.c0.domain_end());
    const double scan1 = std::min(Tn, pair.c1.domain_end());
    if (auto z = first_nonpositive(pair.c0, scan0)) { tz = std::min(tz, *z); clipped = true; }
    if (auto z = first_nonpositive(pair.c1, scan1)) { tz = std::min(tz, *z); clipped = true; }

    ProblemSpec fin = spec;
    GridSpec gn = grid;
    if (clipped) {
      // keep dt0 so window nodes still align; shave the horizon down to
      // a whole number of steps inside the positivity domain
      int nt_n = static_cast<int>(std::floor(tz / dt0 + 1e-12));
      if (nt_n >= 1) {
        gn.nt = nt_n;
        fin.horizon = nt_n * dt0;
      } else {
        gn.nt = 1;  // zero before the first step: a one-step problem
        fin.horizon = tz;
      }
    } else {
      fin.horizon = Tn;
      gn.nt = grid.nt << n;  // fixed dt: grids nest across doublings
    }
    ValueSurface cur = solve_core(fin, gn, diag, T0);
    res.horizons.push_back(*fin.horizon);

    const bool comparable =
        n > 0 && prev.t_grid.size() <= cur.t_grid.size();
    if (comparable) {
      double sup = 0.0, min_inc = 0.0;
      for (std::size_t i = 0; i < prev.t_grid.size(); ++i)
        for (std::size_t j = 0; j < prev.v.cols; ++j) {
          double d = cur.v(i, j) - prev.v(i, j);
          sup = std::max(sup, std::abs(d));
          min_inc = std::min(min_inc, d);
        }
      res.sup_diffs.push_back(sup);
      res.min_increment = std::min(res.min_increment, min_inc);
      if (sup < grid.horizon_tail_tol) {
        res.converged = true;
        prev = std::move(cur);
        break;
      }
    }
    prev = std::move(cur);
    if (clipped) {
      // nothing changes beyond the zero: the truncation is exact
      res.converged = true;
      break;
    }
  }

  res.monotone_certificate = res.min_increment >= -(1e-10 + grid.psor_tol);
  res.solved_horizon = prev.requested_horizon;
  res.report_window = std::min(T0, res.solved_horizon);
  res.surface = std::move(prev);
  return res;
}

Matrix pde_residual(const ValueSurface& s, const ProblemSpec& spec) {
  const std::size_t rows = s.t_grid.size(), cols = s.pi_grid.size();
  Matrix r(rows, cols);
  const double dt = s.dt(), dpi = s.dpi();
  const double half_a2 = 0.5 * spec.signal_gap * spec.signal_gap;
  const DiscountPair& pair = spec.discounts;
  for (std::size_t i = 0; i < rows; ++i) {
    r(i, 0) = s.v(i, 0) - 0.0;
    r(i, cols - 1) = s.v(i, cols - 1) - pair.c1.value(s.t_grid[i]);
  }
  for (std::size_t i = 1; i + 1 < rows; ++i) {
    for (std::size_t j = 1; j + 1 < cols; ++j) {
      if (s.stopped(i, j)) {
        r(i, j) = s.v(i, j) - s.g(i, j);
        continue;
      }
      double p = s.pi_grid[j];
      double D = half_a2 * p * p * (1.0 - p) * (1.0 - p);
      double vt = (s.v(i + 1, j) - s.v(i - 1, j)) / (2.0 * dt);
      double vpp = (s.v(i, j + 1) - 2.0 * s.v(i, j) + s.v(i, j - 1)) / (dpi * dpi);
      r(i, j) = vt + D * vpp;
    }
  }
  return r;
}

SmoothFitReport smooth_fit_gap(const ValueSurface& s, const DiscountPair& pair) {
  SmoothFitReport rep;
  const std::size_t rows = s.t_grid.size(), cols = s.pi_grid.size();
  const double dpi = s.dpi();
  const std::size_t last = s.has_terminal_row ? rows - 1 : rows;
  for (std::size_t i = 1; i < last; ++i) {
    rep.t.push_back(s.t_grid[i]);
    std::size_t j = 1;
    while (j + 1 < cols && !s.stopped(i, j)) ++j;
    if (j + 1 >= cols || j == 1) {  // contact at a grid endpoint: no quotient
      rep.gap.push_back(0.0);
      rep.defined.push_back(0);
      continue;
    }
    double quotient = (s.v(i, j) - s.v(i, j - 1)) / dpi;
    double slope = pair.c0.value(s.t_grid[i]) + pair.c1.value(s.t_grid[i]);
    double gap = std::abs(quotient - slope);
    rep.gap.push_back(gap);
    rep.defined.push_back(1);
    rep.max_gap = std::max(rep.max_gap, gap);
  }
  return rep;
}

}  // namespace dstop
