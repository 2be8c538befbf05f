#pragma once

#include <cstddef>
#include <vector>

namespace dstop {

/// Execution mode for the data-parallel kernels. Serial runs are the
/// reference implementation; parallel runs shard work across OpenMP
/// threads and must produce bit-identical results.
enum class Execution { serial, parallel };

/// Worker count for parallel kernels: hardware threads capped by the
/// DEADLINE_STOP_THREADS environment variable (values < 1 ignored).
int worker_count();

/// Standard normal survival function P(Z > x), relative accuracy ~1e-15
/// (erfc-based; never computed as 1 - cdf).
double normal_sf(double x);
double normal_cdf(double x);
double normal_pdf(double x);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1], n >= 1. Rules are cached per order.
const QuadratureRule& gauss_legendre(int n);

/// Gauss-Hermite rule (physicists' weight exp(-x^2)), n >= 1, cached.
/// Integrates f against exp(-x^2) dx; weights sum to sqrt(pi).
const QuadratureRule& gauss_hermite(int n);

/// Cubic Hermite interpolant through (x_i, y_i) with prescribed slopes
/// d_i. Knots strictly increasing. Evaluation outside [x_front, x_back]
/// is a domain error.
class CubicHermite {
 public:
  CubicHermite() = default;
  CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> d);
  double value(double t) const;
  double derivative(double t) const;
  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  std::size_t segment(double t) const;
  std::vector<double> x_, y_, d_;
};

/// Neumaier compensated accumulator; deterministic for a fixed add order.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace dstop
