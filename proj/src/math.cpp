#include "dstop/math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dstop {

int worker_count() {
  static const int cached = [] {
#ifdef _OPENMP
    int hw = omp_get_max_threads();
#else
    int hw = 1;
#endif
    if (const char* env = std::getenv("DEADLINE_STOP_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) hw = std::min<long>(hw, v);
    }
    return std::max(hw, 1);
  }();
  return cached;
}

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace {

QuadratureRule make_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev initial guess, Newton on the three-term recurrence.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule make_gauss_hermite(int n) {
  // Orthonormal recurrence keeps values in double range up to n ~ 200.
  auto eval = [n](double x, double& deriv) {
    const double p0init = std::pow(std::numbers::pi, -0.25);
    double pm1 = 0.0, p = p0init;
    for (int k = 0; k < n; ++k) {
      double pnext = x * std::sqrt(2.0 / (k + 1.0)) * p - std::sqrt(k / (k + 1.0)) * pm1;
      pm1 = p;
      p = pnext;
    }
    deriv = std::sqrt(2.0 * n) * pm1;
    return p;
  };
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  // Every positive root lies in (0, sqrt(2n+2)) and neighboring roots
  // are at least ~pi/sqrt(2n) apart, so a sign scan at an 8x finer step
  // brackets each root individually; bisection then cannot miss, and a
  // few Newton steps polish to machine precision. Walk-in extrapolated
  // guesses (the usual shortcut) start landing on wrong roots near
  // n ~ 200, which silently corrupts the whole rule.
  const double top = std::sqrt(2.0 * n + 2.0);
  const double scan = std::numbers::pi / (8.0 * std::sqrt(2.0 * n));
  double deriv = 0.0;
  double lo = (n % 2 == 1) ? scan * 0.5 : 0.0;  // odd n: skip the root at 0
  double flo = eval(lo, deriv);
  int found = 0;
  const int m = n / 2;
  for (double hi = lo + scan; found < m && lo < top; hi += scan) {
    const double fhi = eval(hi, deriv);
    if ((flo < 0.0) != (fhi < 0.0)) {
      double a = lo, b = hi, fa = flo;
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = eval(mid, deriv);
        if ((fa < 0.0) != (fm < 0.0)) {
          b = mid;
        } else {
          a = mid;
          fa = fm;
        }
      }
      double z = 0.5 * (a + b);
      for (int it = 0; it < 4; ++it) {
        const double p = eval(z, deriv);
        const double dz = p / deriv;
        z -= dz;
        if (std::abs(dz) < 1e-15 * (1.0 + std::abs(z))) break;
      }
      eval(z, deriv);
      const double w = 2.0 / (deriv * deriv);
      rule.nodes[m + found + (n % 2)] = z;
      rule.nodes[m - 1 - found] = -z;
      rule.weights[m + found + (n % 2)] = w;
      rule.weights[m - 1 - found] = w;
      ++found;
    }
    lo = hi;
    flo = fhi;
  }
  if (found != m)
    throw std::runtime_error("gauss-hermite: root scan lost a node; order too large");
  if (n % 2 == 1) {
    rule.nodes[m] = 0.0;
    eval(0.0, deriv);
    rule.weights[m] = 2.0 / (deriv * deriv);
  }
  return rule;
}

template <typename F>
const QuadratureRule& cached_rule(int n, std::map<int, QuadratureRule>& cache,
                                  std::mutex& mu, F make) {
  if (n < 1) throw std::domain_error("quadrature order must be >= 1");
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make(n)).first;
  return it->second;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mu;
  return cached_rule(n, cache, mu, make_gauss_legendre);
}

const QuadratureRule& gauss_hermite(int n) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mu;
  return cached_rule(n, cache, mu, make_gauss_hermite);
}

CubicHermite::CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> d)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {
  if (x_.size() < 2 || x_.size() != y_.size() || x_.size() != d_.size())
    throw std::invalid_argument("cubic hermite: need >= 2 knots with matching arrays");
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1]))
      throw std::invalid_argument("cubic hermite: knots must be strictly increasing");
}

std::size_t CubicHermite::segment(double t) const {
  if (t < x_.front() || t > x_.back())
    throw std::domain_error("cubic hermite: evaluation outside knot range at t=" + std::to_string(t));
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - x_.begin());
  if (i == 0) return 0;
  if (i >= x_.size()) return x_.size() - 2;
  return i - 1;
}

double CubicHermite::value(double t) const {
  std::size_t i = segment(t);
  double h = x_[i + 1] - x_[i];
  double s = (t - x_[i]) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1;
  double h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2;
  double h11 = s3 - s2;
  return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double CubicHermite::derivative(double t) const {
  std::size_t i = segment(t);
  double h = x_[i + 1] - x_[i];
  double s = (t - x_[i]) / h;
  double s2 = s * s;
  double dh00 = (6 * s2 - 6 * s) / h;
  double dh10 = 3 * s2 - 4 * s + 1;
  double dh01 = (-6 * s2 + 6 * s) / h;
  double dh11 = 3 * s2 - 2 * s;
  return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

void CompensatedSum::add(double v) {
  double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v))
    comp_ += (sum_ - t) + v;
  else
    comp_ += (v - t) + sum_;
  sum_ = t;
}

}  // namespace dstop
