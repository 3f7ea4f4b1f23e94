#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "covlab/errors.hpp"

namespace covlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// z-score of a two-sided 95% normal interval.
inline constexpr double kZ95 = 1.959963984540054;

// Default relative tolerance for probability-mass checks.
inline constexpr double kDefaultMassTolerance = 1e-9;

// x*ln(x) with the 0*ln(0) = 0 convention.
inline double xlnx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// ln(sum_i exp(a[i])). -inf entries contribute nothing; an empty or all -inf
// input yields -inf. +inf entries dominate.
inline double log_sum_exp(std::span<const double> a) {
  double m = -kInf;
  for (double x : a) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double x : a) {
    if (x != -kInf) s += std::exp(x - m);
  }
  return m + std::log(s);
}

struct GoldenResult {
  double arg = 0.0;
  double value = 0.0;
};

// Maximum of a concave function on [lo, hi] by golden-section search.
// Returns the best evaluated point; arg_tol bounds the bracket width at exit.
template <class F>
GoldenResult golden_section_max(F&& f, double lo, double hi, double arg_tol = 1e-10,
                                int max_iter = 300) {
  if (!(lo <= hi)) throw ValidationError("golden_section_max: lo > hi");
  const double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  GoldenResult best = f1 >= f2 ? GoldenResult{x1, f1} : GoldenResult{x2, f2};
  for (int it = 0; it < max_iter && (b - a) > arg_tol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
      if (f2 > best.value) best = {x2, f2};
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
      if (f1 > best.value) best = {x1, f1};
    }
  }
  const double xm = 0.5 * (a + b);
  const double fm = f(xm);
  if (fm > best.value) best = {xm, fm};
  return best;
}

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

// Wilson score interval for a binomial proportion.
inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                      double z = kZ95) {
  if (trials == 0) throw ValidationError("wilson_interval: zero trials");
  if (successes > trials) throw ValidationError("wilson_interval: successes > trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = (z / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  WilsonInterval w{clamp01(center - half), clamp01(center + half)};
  // The interval contains p-hat by construction; keep that exact at the ends.
  if (successes == 0) w.low = 0.0;
  if (successes == trials) w.high = 1.0;
  return w;
}

inline double log_factorial(std::uint64_t n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_binomial_coeff(std::uint64_t n, std::uint64_t k) {
  if (k > n) return -kInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// ln of n! / prod_i counts[i]!, with sum(counts) == n expected.
inline double log_multinomial_coeff(std::uint64_t n, std::span<const int> counts) {
  double v = log_factorial(n);
  for (int c : counts) v -= log_factorial(static_cast<std::uint64_t>(c));
  return v;
}

}  // namespace covlab
