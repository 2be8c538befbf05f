#include "dstop/discounts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace dstop {

namespace {

constexpr double kStepFlushWidth = 1e-12;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

}  // namespace

double smoothed_step(double t, double center, double sharpness) {
  double w = t - center;
  if (w < kStepFlushWidth) return 0.0;
  return std::exp(-1.0 / (sharpness * w));
}

double smoothed_step_derivative(double t, double center, double sharpness) {
  double w = t - center;
  if (w < kStepFlushWidth) return 0.0;
  double f = std::exp(-1.0 / (sharpness * w));
  return f / (sharpness * w * w);
}

DiscountModel DiscountModel::exponential(double rate, double scale) {
  if (!(rate >= 0.0)) throw std::invalid_argument("exponential discount: rate must be >= 0");
  if (!(scale > 0.0)) throw std::invalid_argument("discount scale must be > 0");
  DiscountModel m;
  m.kind_ = DiscountKind::exponential;
  m.rate_ = rate;
  m.scale_ = scale;
  return m;
}

DiscountModel DiscountModel::linear(double intercept, double slope, double scale) {
  if (!(intercept >= 0.0)) throw std::invalid_argument("linear discount: intercept must be >= 0");
  if (!(scale > 0.0)) throw std::invalid_argument("discount scale must be > 0");
  DiscountModel m;
  m.kind_ = DiscountKind::linear;
  m.intercept_ = intercept;
  m.slope_ = slope;
  m.scale_ = scale;
  return m;
}

DiscountModel DiscountModel::smoothed_step_mix(double intercept, double slope,
                                               std::vector<StepComponent> steps,
                                               double sharpness, double scale) {
  if (!(sharpness > 0.0)) throw std::invalid_argument("step mix: sharpness must be > 0");
  if (!(scale > 0.0)) throw std::invalid_argument("discount scale must be > 0");
  DiscountModel m;
  m.kind_ = DiscountKind::smoothed_step_mix;
  m.intercept_ = intercept;
  m.slope_ = slope;
  m.steps_ = std::move(steps);
  m.sharpness_ = sharpness;
  m.scale_ = scale;
  return m;
}

DiscountModel DiscountModel::tabulated(std::vector<double> t, std::vector<double> c,
                                       std::vector<double> dc, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("discount scale must be > 0");
  DiscountModel m;
  m.kind_ = DiscountKind::tabulated;
  m.table_ = CubicHermite(t, c, dc);
  m.knot_t_ = std::move(t);
  m.knot_c_ = std::move(c);
  m.knot_dc_ = std::move(dc);
  m.scale_ = scale;
  return m;
}

double DiscountModel::value(double t) const {
  if (t < 0.0) throw std::domain_error(fmt("discount evaluated at negative t=%.17g", t));
  switch (kind_) {
    case DiscountKind::exponential:
      return scale_ * std::exp(-rate_ * t);
    case DiscountKind::linear:
      return scale_ * (intercept_ + slope_ * t);
    case DiscountKind::smoothed_step_mix: {
      double v = intercept_ + slope_ * t;
      for (const auto& s : steps_) v += s.weight * smoothed_step(t, s.center, sharpness_);
      return scale_ * v;
    }
    case DiscountKind::tabulated:
      return scale_ * table_.value(t);
  }
  return 0.0;
}

double DiscountModel::derivative(double t) const {
  if (t < 0.0) throw std::domain_error(fmt("discount derivative at negative t=%.17g", t));
  switch (kind_) {
    case DiscountKind::exponential:
      return -rate_ * scale_ * std::exp(-rate_ * t);
    case DiscountKind::linear:
      return scale_ * slope_;
    case DiscountKind::smoothed_step_mix: {
      double v = slope_;
      for (const auto& s : steps_) v += s.weight * smoothed_step_derivative(t, s.center, sharpness_);
      return scale_ * v;
    }
    case DiscountKind::tabulated:
      return scale_ * table_.derivative(t);
  }
  return 0.0;
}

double DiscountModel::log_derivative(double t) const {
  double v = value(t);
  if (!(v > 0.0))
    throw std::domain_error(fmt("log-derivative needs positive value, got c(%.6g)=%.6g", t, v));
  return derivative(t) / v;
}

std::optional<double> DiscountModel::limit_at_infinity() const {
  if (declared_limit_) return declared_limit_;
  switch (kind_) {
    case DiscountKind::exponential:
      return rate_ > 0.0 ? 0.0 : scale_;
    case DiscountKind::linear:
      if (slope_ == 0.0) return scale_ * intercept_;
      return std::nullopt;
    case DiscountKind::smoothed_step_mix: {
      if (slope_ != 0.0) return std::nullopt;
      double v = intercept_;
      for (const auto& s : steps_) v += s.weight;  // each step -> 1
      return scale_ * v;
    }
    case DiscountKind::tabulated:
      return std::nullopt;
  }
  return std::nullopt;
}

double DiscountModel::domain_end() const {
  if (kind_ == DiscountKind::tabulated) return knot_t_.back();
  return std::numeric_limits<double>::infinity();
}

DiscountModel DiscountModel::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("discount scale factor must be > 0");
  DiscountModel m = *this;
  m.scale_ *= factor;
  if (m.declared_limit_) m.declared_limit_ = *m.declared_limit_ * factor;
  return m;
}

void check_problem(const ProblemSpec& spec) {
  if (!(spec.signal_gap > 0.0))
    throw std::invalid_argument("problem: signal gap must be > 0");
  if (!(spec.low_drift <= 0.0) || !(spec.high_drift() >= 0.0))
    throw std::invalid_argument("problem: drifts must satisfy a + b >= 0 >= b");
  if (!(spec.prior > 0.0 && spec.prior < 1.0))
    throw std::invalid_argument("problem: prior must lie in (0,1)");
  if (spec.horizon && !(*spec.horizon > 0.0))
    throw std::invalid_argument("problem: horizon must be > 0");
}

namespace {

/// Probe whether a model behaves like a survival function: value 1 at 0,
/// non-increasing and within [0,1] while it stays non-negative. The probe
/// window is structural; simulation revalidates on its actual horizon.
bool looks_like_survival(const DiscountModel& m, double probe_end) {
  double end = std::min(m.domain_end(), probe_end);
  if (std::abs(m.value(0.0) - 1.0) > 1e-9) return false;
  const int n = 2001;
  double prev = m.value(0.0);
  for (int i = 1; i < n; ++i) {
    double t = end * i / (n - 1);
    double v = m.value(t);
    if (!std::isfinite(v)) return false;
    if (v < 0.0) break;  // deadline certain from here on; fine for sampling
    if (v > 1.0 + 1e-9) return false;
    if (v > prev + 1e-9) return false;
    prev = v;
  }
  return true;
}

}  // namespace

DiscountPair embed_original(double a, double b, const DiscountModel& surv0,
                            const DiscountModel& surv1, AssumptionMode mode) {
  if (!(a > 0.0)) throw std::invalid_argument("embed: signal gap a must be > 0");
  if (!(b <= 0.0) || !(a + b >= 0.0))
    throw std::invalid_argument("embed: drifts must satisfy a + b >= 0 >= b");
  if (b == 0.0 || a + b == 0.0)
    throw std::invalid_argument(
        "embed: degenerate drifts (b = 0 or a + b = 0 makes one claim costless/worthless)");
  DiscountPair pair;
  pair.c0 = surv0.scaled(-b);
  pair.c1 = surv1.scaled(a + b);
  pair.mode = mode;
  pair.survival0 = surv0;
  pair.survival1 = surv1;
  pair.deadline_interpretable =
      looks_like_survival(surv0, 8.0) && looks_like_survival(surv1, 8.0);
  return pair;
}

bool ValidationReport::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.holds;
  return false;
}

bool ValidationReport::strict_ok() const {
  return entry("positivity") && entry("smoothness") && entry("monotone_decay") &&
         entry("bounded_slopes") && entry("log_derivative_gap");
}

bool ValidationReport::relaxed_ok() const {
  return entry("nonnegativity") && entry("smoothness") && entry("bounded_slopes") &&
         entry("log_derivative_gap") && entry("sum_monotone") && entry("one_curve_monotone");
}

bool ValidationReport::boundary_conditions_ok() const {
  return entry("log_derivative_monotone") && entry("penalty_log_derivative_negative") &&
         entry("terminal_positive");
}

bool ValidationReport::passes() const {
  return mode == AssumptionMode::strict ? strict_ok() : relaxed_ok();
}

ValidationReport validate_assumptions(const DiscountPair& pair, double T, int grid_n) {
  if (!(T > 0.0)) throw std::invalid_argument("validate: horizon must be > 0");
  if (grid_n < 3) throw std::invalid_argument("validate: grid_n must be >= 3");
  if (T > pair.c0.domain_end() + 1e-12 || T > pair.c1.domain_end() + 1e-12)
    throw std::domain_error("validate: horizon exceeds tabulated domain");

  ValidationReport rep;
  rep.mode = pair.mode;
  rep.grid_n = grid_n;
  rep.horizon = T;

  std::vector<double> t(grid_n), c0(grid_n), c1(grid_n), dc0(grid_n), dc1(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    t[i] = T * i / (grid_n - 1);
    c0[i] = pair.c0.value(t[i]);
    c1[i] = pair.c1.value(t[i]);
    dc0[i] = pair.c0.derivative(t[i]);
    dc1[i] = pair.c1.derivative(t[i]);
  }
  const double vscale = 1.0 + std::max(std::abs(c0[0]), std::abs(c1[0]));
  const double slope_tol = 1e-10 * vscale;

  auto add = [&rep](const std::string& name, bool holds, std::optional<double> witness,
                    std::string detail) {
    rep.entries.push_back({name, holds, witness, std::move(detail)});
  };

  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i + 1 < grid_n && ok; ++i)  // [0, T)
      if (!(c0[i] > 0.0) || !(c1[i] > 0.0)) { ok = false; w = t[i]; }
    add("positivity", ok, w, ok ? "both curves > 0 before the horizon" : "curve hit <= 0");
  }
  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n && ok; ++i)
      if (!std::isfinite(c0[i]) || !std::isfinite(c1[i]) || !std::isfinite(dc0[i]) ||
          !std::isfinite(dc1[i])) { ok = false; w = t[i]; }
    add("smoothness", ok, w,
        ok ? "finite values and slopes on the grid; families are piecewise smooth"
           : "non-finite value or slope");
  }
  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n && ok; ++i)
      if (dc0[i] > slope_tol || dc1[i] > slope_tol) { ok = false; w = t[i]; }
    add("monotone_decay", ok, w, ok ? "both curves non-increasing" : "increasing curve");
  }
  {
    double m = 0.0;
    for (int i = 0; i < grid_n; ++i)
      m = std::max({m, std::abs(dc0[i]), std::abs(dc1[i])});
    bool ok = std::isfinite(m);
    add("bounded_slopes", ok, std::nullopt, fmt("max |c'| on grid = %.6g", m));
  }
  {
    bool ok = true;
    std::optional<double> w;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < grid_n && ok; ++i) {  // [0, T)
      if (!(c0[i] > 0.0) || !(c1[i] > 0.0)) continue;
      double gap = dc0[i] / c0[i] - dc1[i] / c1[i];
      min_gap = std::min(min_gap, gap);
      if (!(gap > 0.0)) { ok = false; w = t[i]; }
    }
    add("log_derivative_gap", ok, w, fmt("min gap on grid = %.6g", min_gap));
  }
  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n && ok; ++i)
      if (c0[i] < -1e-12 * vscale || c1[i] < -1e-12 * vscale) { ok = false; w = t[i]; }
    add("nonnegativity", ok, w, ok ? "both curves >= 0" : "negative curve value");
  }
  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n && ok; ++i)
      if (dc0[i] + dc1[i] > slope_tol) { ok = false; w = t[i]; }
    add("sum_monotone", ok, w, ok ? "c0 + c1 non-increasing" : "sum increases");
  }
  {
    bool ok0 = true, ok1 = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n; ++i) {
      if (dc0[i] > slope_tol && ok0) { ok0 = false; if (!w) w = t[i]; }
      if (dc1[i] > slope_tol && ok1) { ok1 = false; if (!w) w = t[i]; }
    }
    add("one_curve_monotone", ok0 || ok1, (ok0 || ok1) ? std::nullopt : w,
        ok0 && ok1 ? "both non-increasing" : (ok0 ? "penalty curve non-increasing"
                                                  : (ok1 ? "reward curve non-increasing"
                                                         : "both curves increase somewhere")));
  }
  {
    // Transformed-boundary monotonicity needs: log-derivative of the
    // penalty curve non-increasing, its gap to the reward curve widening.
    bool ok = true;
    std::optional<double> w;
    double prev_b0 = 0.0, prev_diff = 0.0;
    bool have_prev = false;
    for (int i = 0; i < grid_n; ++i) {
      if (!(c0[i] > 0.0) || !(c1[i] > 0.0)) { ok = false; if (!w) w = t[i]; break; }
      double b0 = dc0[i] / c0[i];
      double b1 = dc1[i] / c1[i];
      double diff = b1 - b0;
      if (have_prev) {
        double btol = 1e-10 * (1.0 + std::abs(prev_b0)) + slope_tol;
        if (b0 > prev_b0 + btol || diff > prev_diff + btol) { ok = false; if (!w) w = t[i]; break; }
      }
      prev_b0 = b0;
      prev_diff = diff;
      have_prev = true;
    }
    add("log_derivative_monotone", ok, w,
        ok ? "penalty log-derivative and its spread to reward both non-increasing"
           : "log-derivative monotonicity fails");
  }
  {
    bool ok = true;
    std::optional<double> w;
    for (int i = 0; i < grid_n && ok; ++i) {
      if (!(c0[i] > 0.0)) { ok = false; w = t[i]; break; }
      if (!(dc0[i] / c0[i] < 0.0)) { ok = false; w = t[i]; }
    }
    add("penalty_log_derivative_negative", ok, w,
        ok ? "penalty curve strictly decaying in log scale" : "non-negative log-derivative");
  }
  {
    bool ok = c0[grid_n - 1] > 0.0 && c1[grid_n - 1] > 0.0;
    add("terminal_positive", ok, ok ? std::nullopt : std::optional<double>(T),
        fmt("c0(T)=%.6g, c1(T)=%.6g", c0[grid_n - 1], c1[grid_n - 1]));
  }
  return rep;
}

std::optional<double> first_nonpositive(const DiscountModel& model, double T, int grid_n) {
  if (!(T > 0.0)) throw std::invalid_argument("first_nonpositive: T must be > 0");
  double end = std::min(T, model.domain_end());
  if (!(model.value(0.0) > 0.0)) return 0.0;
  double prev_t = 0.0;
  for (int i = 1; i < grid_n; ++i) {
    double ti = end * i / (grid_n - 1);
    if (model.value(ti) <= 0.0) {
      double lo = prev_t, hi = ti;  // value(lo) > 0 >= value(hi)
      for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + end); ++it) {
        double mid = 0.5 * (lo + hi);
        (model.value(mid) > 0.0 ? lo : hi) = mid;
      }
      return hi;
    }
    prev_t = ti;
  }
  return std::nullopt;
}

double clipped_horizon(const DiscountPair& pair, double T) {
  double eff = T;
  if (auto z = first_nonpositive(pair.c0, T)) eff = std::min(eff, *z);
  if (auto z = first_nonpositive(pair.c1, T)) eff = std::min(eff, *z);
  return eff;
}

}  // namespace dstop
