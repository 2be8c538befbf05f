#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dstop/discounts.hpp"

namespace dstop {

struct GridSpec {
  int nt = 400;              // time steps (nt+1 nodes)
  int npi = 400;             // interior belief nodes (npi+2 incl. 0 and 1)
  double theta_weight = 0.5; // implicit blend: 1 = fully implicit,
                             // 0.5 = trapezoidal; below 0.5 the explicit
                             // stability bound is enforced at solve time
  double psor_tol = 1e-9;    // sweep-update convergence threshold
  int psor_max_iter = 50000;
  double psor_omega = 0.0;   // relaxation; 0 (default) = spectral auto-estimate
  int rannacher_steps = 2;   // fully implicit startup steps
  double horizon_tail_tol = 1e-5;  // infinite-horizon stopping tolerance
  int max_doublings = 12;          // horizon doublings allowed
  double initial_horizon = 1.0;    // first truncation of an infinite horizon
};

void check_grid(const GridSpec& grid);

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Stopping payoff (reward-weighted belief net of penalty), floored at 0.
double gain(const DiscountPair& pair, double t, double pi);

/// Value surface on the uniform (t, belief) grid. Row i is time t_grid[i];
/// columns run over pi_grid including both absorbing endpoints.
struct ValueSurface {
  std::vector<double> t_grid;   // nt+1 nodes on [0, horizon]
  std::vector<double> pi_grid;  // npi+2 nodes on [0, 1]
  Matrix v, g;
  std::vector<std::uint8_t> stop;  // contact flags, row-major like v
  double horizon = 0.0;
  double requested_horizon = 0.0;
  bool horizon_clipped = false;  // horizon shortened to a discount zero
  bool has_terminal_row = true;  // false for windows cut from longer solves
  double contact_tol = 0.0;      // scale-free part of the contact test

  double dt() const { return t_grid[1] - t_grid[0]; }
  double dpi() const { return pi_grid[1] - pi_grid[0]; }
  bool stopped(std::size_t i, std::size_t j) const { return stop[i * v.cols + j] != 0; }
  /// Bilinear interpolation of v.
  double value_at(double t, double pi) const;
};

struct SolveDiagnostics {
  long long total_psor_sweeps = 0;
  int max_sweeps_single_step = 0;
  double omega_used = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, double t, double residual)
      : std::runtime_error(msg), time(t), residual(residual) {}
  double time;
  double residual;
};

/// Backward induction for the finite-horizon obstacle problem:
/// time-blend scheme in t, second differences in belief, PSOR for the
/// complementarity condition, absorbing Dirichlet data at both belief
/// endpoints. The horizon is clipped to the first zero of either
/// discount curve. Throws SolverError when a PSOR solve stalls.
ValueSurface solve_finite(const ProblemSpec& spec, const GridSpec& grid,
                          SolveDiagnostics* diag = nullptr);

struct InfiniteSolveResult {
  ValueSurface surface;            // final solve cut to [0, report_window]
  std::vector<double> horizons;    // truncation horizons tried
  std::vector<double> sup_diffs;   // sup of abs change per doubling on the window
  double min_increment = 0.0;      // most negative node-wise change seen
  bool monotone_certificate = false;
  bool converged = false;
  double report_window = 0.0;
  double solved_horizon = 0.0;
};

/// Infinite horizon via horizon doubling: truncations T_n = T_0 * 2^n
/// at fixed dt share grid nodes, each surface must dominate the previous
/// (value increases with horizon), and the iteration stops when the
/// nested-window sup difference falls below horizon_tail_tol. Each
/// discount curve needs a declared/derivable limit at infinity or a zero
/// within the deepest truncation; a zero inside the current truncation
/// ends the problem there (the truncation is then exact).
InfiniteSolveResult solve_infinite(const ProblemSpec& spec, const GridSpec& grid,
                                   SolveDiagnostics* diag = nullptr);

/// Scheme-independent consistency check: central second differences in
/// belief plus central time differences in continuation nodes, value
/// minus gain in stopped nodes, boundary-condition violation at the
/// belief endpoints. Rows t=0 and t=horizon carry zeros (no central
/// stencil there).
Matrix pde_residual(const ValueSurface& surf, const ProblemSpec& spec);

struct SmoothFitReport {
  std::vector<double> t;        // interior time nodes
  std::vector<double> gap;      // |one-sided slope below contact - gain slope|
  std::vector<std::uint8_t> defined;  // 0 when the row has no interior contact
  double max_gap = 0.0;         // over defined rows
};

/// One-sided difference quotient of v across the contact column minus
/// the gain slope c0(t) + c1(t), per interior time row.
SmoothFitReport smooth_fit_gap(const ValueSurface& surf, const DiscountPair& pair);

}  // namespace dstop
