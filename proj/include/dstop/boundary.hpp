#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dstop/posterior.hpp"
#include "dstop/solver.hpp"

namespace dstop {

enum class ContactMethod : std::uint8_t {
  interpolated,  // zero of v - g between the last free and first contact node
  grid_node,     // fell back to the first contact node itself
  gain_root,     // degenerate all-stop row, pinned to the gain root
  all_continue,  // no contact in the row; level 1 by convention
};

const char* to_string(ContactMethod m);

/// Stopping boundary in belief space: stop at time t once the belief
/// reaches level(t).
struct Boundary {
  std::vector<double> t_grid;       // knot times in [0, horizon)
  std::vector<double> level;        // b(t) in (0, 1]
  std::vector<double> transformed;  // log(c1 b / (c0 (1 - b))), see transform_boundary
  std::vector<ContactMethod> method;
  double horizon = 0.0;
  bool has_terminal = false;
  double terminal_level = 0.0;  // gain-root extraction at the horizon row
  double left_limit = 0.0;      // level at the last knot before the horizon
  double source_dpi = 0.0;      // belief spacing of the source grid (0 = none)
  bool has_transform = false;

  /// Piecewise-linear level; beyond the last knot blends into the
  /// terminal level when one exists, else holds the last knot.
  double interpolate(double t) const;
};

/// Smallest belief with positive gain, c0(t) / (c0(t) + c1(t)).
double gain_root(const DiscountPair& pair, double t);

/// Boundary value approached at the horizon: the gain root there.
double terminal_limit(const DiscountPair& pair, double T);

/// Per-row first-contact scan of the stop mask, refined by linear
/// interpolation of v - g across the contact column. The terminal row
/// is pinned at the gain root (value equals gain there, so the mask is
/// uninformative); all-stop rows degrade to the gain root and are
/// reported through `method`, not as errors.
Boundary extract_boundary(const ValueSurface& surf, const DiscountPair& pair);

/// Fill `transformed` with the log reward-to-penalty odds of the
/// boundary. Domain error when a level sits at 0 or 1.
Boundary transform_boundary(Boundary b, const DiscountPair& pair);

struct MonotonicityReport {
  bool asserted = false;  // monotonicity conditions held, violations are significant
  bool passed = true;
  int violations = 0;
  double max_violation = 0.0;
  std::optional<double> witness_t;
};

/// Node-to-node non-increase of the transformed boundary with
/// grid-induced slack. Asserted only when the validation report carries
/// the boundary monotonicity conditions; otherwise measured and reported.
MonotonicityReport check_monotone_transformed(const Boundary& b,
                                              const ValidationReport& rep);

struct ResidualOptions {
  int quad_n = 64;     // total time-integral budget, >= 16 (composite, >= 2/panel)
  int hermite_n = 64;  // terminal-expectation nodes per mixture branch
  Execution exec = Execution::parallel;
};

/// Early-claim identity residual |lhs - rhs| at every boundary knot:
/// lhs(t) = b(t)(c0(t) + c1(t)) - c0(t); rhs(t) is the horizon
/// expectation of the terminal gain minus the integral of discount decay
/// against the crossing moments of the belief started at b(t). Panels
/// split at boundary knots; the level between knots is interpolated
/// linearly. Knots with level outside (0,1) yield NaN.
std::vector<double> integral_equation_residual(const Boundary& b, const ProblemSpec& spec,
                                               const ResidualOptions& opt = {});

struct PicardOptions {
  // The iteration contracts at roughly 0.99 per sweep on typical grids,
  // so the budget must cover several hundred sweeps for the default tol.
  int max_iter = 1000;
  double tol = 1e-6;          // sup-change convergence threshold; 0 never converges
  int quad_n = 64;
  int hermite_n = 64;
  double ceiling_margin = 1e-6;  // levels clipped to <= 1 - margin
  Execution exec = Execution::parallel;
};

struct PicardResult {
  Boundary boundary;
  std::vector<double> sup_changes;
  bool converged = false;
};

/// Fixed-point iteration of the early-claim identity on a given time
/// grid, seeded at the terminal limit and clipped to [gain root,
/// 1 - margin] each sweep.
PicardResult solve_boundary_picard(const ProblemSpec& spec, const std::vector<double>& t_grid,
                                   const PicardOptions& opt = {});

}  // namespace dstop
