#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace brwx::numeric {

struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// pairwise summation, O(log n) error growth
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    Kahan k;
    for (double x : xs) k.add(x);
    return k.value();
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// gcd of positive reals up to an absolute tolerance (Euclid with IEEE remainder)
inline double real_gcd(double a, double b, double tol) {
  a = std::fabs(a);
  b = std::fabs(b);
  while (b > tol) {
    double r = std::fabs(std::remainder(a, b));
    if (r > b - tol) r = 0.0;
    a = b;
    b = r;
  }
  return a;
}

// best rational approximation p/q with q <= qmax (continued fractions);
// returns true when |x - p/q| <= tol
inline bool nearly_rational(double x, int qmax, double tol) {
  double frac = x;
  long long p0 = 1, q0 = 0, p1 = (long long)std::floor(frac), q1 = 1;
  double rem = frac - std::floor(frac);
  for (int it = 0; it < 64; ++it) {
    if (std::fabs(x - (double)p1 / (double)q1) <= tol) return true;
    if (rem < 1e-15) break;
    double inv = 1.0 / rem;
    long long a = (long long)std::floor(inv);
    rem = inv - std::floor(inv);
    long long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > qmax) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
  }
  return std::fabs(x - (double)p1 / (double)q1) <= tol;
}

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  Kahan k;
  for (double x : xs) k.add(std::exp(x - m));
  return m + std::log(k.value());
}

}  // namespace brwx::numeric
