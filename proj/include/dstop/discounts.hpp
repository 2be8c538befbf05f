#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dstop/math.hpp"

namespace dstop {

enum class DiscountKind { exponential, linear, smoothed_step_mix, tabulated };

/// Smoothed unit step: 0 for t <= s, exp(-1/(k(t-s))) for t > s.
/// C-infinity across the center; values below t-s = 1e-12 flush to 0.
double smoothed_step(double t, double center, double sharpness);
double smoothed_step_derivative(double t, double center, double sharpness);

struct StepComponent {
  double weight = 0.0;
  double center = 0.0;
};

/// Time-value weight curve c(t) >= 0. Four parametric families share the
/// interface; all are C^1 on their domain (analytic kinds are C-infinity).
class DiscountModel {
 public:
  DiscountModel() = default;

  static DiscountModel exponential(double rate, double scale = 1.0);
  static DiscountModel linear(double intercept, double slope, double scale = 1.0);
  static DiscountModel smoothed_step_mix(double intercept, double slope,
                                         std::vector<StepComponent> steps,
                                         double sharpness, double scale = 1.0);
  /// Knots (strictly increasing t, value, derivative), cubic Hermite in
  /// between. Derivatives at knots are taken as given.
  static DiscountModel tabulated(std::vector<double> t, std::vector<double> c,
                                 std::vector<double> dc, double scale = 1.0);

  double value(double t) const;
  double derivative(double t) const;
  /// Log-derivative c'(t)/c(t); domain error when c(t) <= 0.
  double log_derivative(double t) const;

  /// Limit of c(t) as t -> infinity, when the family defines one.
  /// Tabulated models may declare it explicitly.
  std::optional<double> limit_at_infinity() const;
  void declare_limit_at_infinity(double v) { declared_limit_ = v; }

  /// Largest t the model can be evaluated at (+inf for analytic kinds).
  double domain_end() const;

  DiscountKind kind() const { return kind_; }
  double scale() const { return scale_; }
  /// Same curve multiplied by a positive constant.
  DiscountModel scaled(double factor) const;

  double rate() const { return rate_; }
  double intercept() const { return intercept_; }
  double slope() const { return slope_; }
  double sharpness() const { return sharpness_; }
  const std::vector<StepComponent>& steps() const { return steps_; }
  const std::vector<double>& knot_t() const { return knot_t_; }
  const std::vector<double>& knot_c() const { return knot_c_; }
  const std::vector<double>& knot_dc() const { return knot_dc_; }

 private:
  DiscountKind kind_ = DiscountKind::exponential;
  double scale_ = 1.0;
  double rate_ = 0.0;
  double intercept_ = 0.0;
  double slope_ = 0.0;
  std::vector<StepComponent> steps_;
  double sharpness_ = 0.0;
  std::vector<double> knot_t_, knot_c_, knot_dc_;
  CubicHermite table_;
  std::optional<double> declared_limit_;
};

enum class AssumptionMode { strict, relaxed };

/// The pair (c0, c1) weighting wrong-claim penalty and correct-claim
/// reward. When both curves are scaled survival functions the pair keeps
/// the originals so deadlines can be sampled.
struct DiscountPair {
  DiscountModel c0;
  DiscountModel c1;
  AssumptionMode mode = AssumptionMode::strict;
  bool deadline_interpretable = false;
  std::optional<DiscountModel> survival0;
  std::optional<DiscountModel> survival1;
};

/// Problem data: signal gap a > 0, low drift b with a + b >= 0 >= b,
/// prior in (0,1), horizon (nullopt = infinite), and the discount pair.
struct ProblemSpec {
  double signal_gap = 0.0;
  double low_drift = 0.0;
  double prior = 0.5;
  std::optional<double> horizon;
  DiscountPair discounts;

  bool infinite_horizon() const { return !horizon.has_value(); }
  double high_drift() const { return signal_gap + low_drift; }
};

/// Throws std::invalid_argument when the fields violate the contract.
void check_problem(const ProblemSpec& spec);

/// Build the discount pair from original-formulation data: drifts (a, b)
/// and per-state deadline survival curves. c0 = -b * surv0,
/// c1 = (a+b) * surv1. Degenerate when b = 0 or a + b = 0. The pair is
/// flagged deadline-interpretable only when both curves look like
/// survival functions (value 1 at t=0, non-increasing, within [0,1]).
DiscountPair embed_original(double a, double b, const DiscountModel& surv0,
                            const DiscountModel& surv1,
                            AssumptionMode mode = AssumptionMode::strict);

struct ValidationEntry {
  std::string name;
  bool holds = false;
  std::optional<double> witness_t;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  AssumptionMode mode = AssumptionMode::strict;
  int grid_n = 0;
  double horizon = 0.0;

  bool entry(const std::string& name) const;
  /// Full assumption set: positivity, smoothness, monotonicity, bounded
  /// slopes, log-derivative gap.
  bool strict_ok() const;
  /// Relaxed set: non-negativity, smoothness, bounded slopes, gap,
  /// non-increasing sum, at least one non-increasing curve.
  bool relaxed_ok() const;
  /// Conditions for monotone transformed boundary.
  bool boundary_conditions_ok() const;
  /// Pass under the pair's declared mode.
  bool passes() const;
};

/// Grid checks of the assumption set over [0, T]. grid_n >= 3.
ValidationReport validate_assumptions(const DiscountPair& pair, double T,
                                      int grid_n = 10001);

/// First t in [0, T] with model value <= 0, refined by bisection;
/// nullopt when the model stays positive.
std::optional<double> first_nonpositive(const DiscountModel& model, double T,
                                        int grid_n = 10001);

/// Effective horizon: T clipped to the first zero of either curve.
double clipped_horizon(const DiscountPair& pair, double T);

}  // namespace dstop
