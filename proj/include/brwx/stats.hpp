#pragma once

// Shared estimation and goodness-of-fit utilities. p-values are asymptotic
// (Kolmogorov series, chi-square upper tail); small-sample exactness is out
// of scope and the callers' tolerances absorb it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "brwx/numeric.hpp"

namespace brwx::stats {

struct EmpiricalSample {
  std::vector<double> values;
  std::vector<double> weights;  // empty = unweighted

  double total_weight() const {
    if (weights.empty()) return static_cast<double>(values.size());
    return std::accumulate(weights.begin(), weights.end(), 0.0);
  }
  // (sum w)^2 / sum w^2
  double effective_size() const {
    if (weights.empty()) return static_cast<double>(values.size());
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
      s += w;
      s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
  }
  void check() const {
    if (values.empty()) throw std::invalid_argument("stats: empty sample");
    if (!weights.empty()) {
      if (weights.size() != values.size()) throw std::invalid_argument("stats: weights length mismatch");
      for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("stats: weights must be positive");
    }
  }
};

// Kolmogorov distribution tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    s += term;
    if (std::fabs(term) < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

inline double ks_p_value(double statistic, double n_effective) {
  double sn = std::sqrt(n_effective);
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * statistic);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

namespace detail {

struct Ecdf {
  std::vector<double> xs;   // sorted values
  std::vector<double> cum;  // cumulative weight fraction at xs[i]
  static Ecdf build(const EmpiricalSample& s) {
    s.check();
    std::vector<std::size_t> idx(s.values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    Ecdf e;
    double tot = s.total_weight(), acc = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      acc += s.weights.empty() ? 1.0 : s.weights[idx[i]];
      double x = s.values[idx[i]];
      if (!e.xs.empty() && e.xs.back() == x)
        e.cum.back() = acc / tot;
      else {
        e.xs.push_back(x);
        e.cum.push_back(acc / tot);
      }
    }
    return e;
  }
  double at(double x) const {  // F(x), right-continuous
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return 0.0;
    return cum[static_cast<std::size_t>(it - xs.begin()) - 1];
  }
};

}  // namespace detail

inline KsResult ks_two_sample(const EmpiricalSample& a, const EmpiricalSample& b) {
  auto ea = detail::Ecdf::build(a);
  auto eb = detail::Ecdf::build(b);
  double d = 0.0;
  for (double x : ea.xs) d = std::max(d, std::fabs(ea.at(x) - eb.at(x)));
  for (double x : eb.xs) d = std::max(d, std::fabs(ea.at(x) - eb.at(x)));
  double na = a.effective_size(), nb = b.effective_size();
  double ne = na * nb / (na + nb);
  return {d, ks_p_value(d, ne)};
}

inline KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  return ks_two_sample(EmpiricalSample{a, {}}, EmpiricalSample{b, {}});
}

inline KsResult ks_one_sample(const EmpiricalSample& a, const std::function<double(double)>& cdf) {
  a.check();
  auto e = detail::Ecdf::build(a);
  double d = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < e.xs.size(); ++i) {
    double f = cdf(e.xs[i]);
    d = std::max(d, std::fabs(e.cum[i] - f));
    d = std::max(d, std::fabs(f - prev));
    prev = e.cum[i];
  }
  return {d, ks_p_value(d, a.effective_size())};
}

inline KsResult ks_one_sample(const std::vector<double>& a, const std::function<double(double)>& cdf) {
  return ks_one_sample(EmpiricalSample{a, {}}, cdf);
}

// inverse standard normal CDF (Acklam's rational approximation + one Halley step)
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - 0.02425) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
  double se = 0.0;
};

inline MeanCi mean_ci(const EmpiricalSample& s, double level = 0.95) {
  s.check();
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("mean_ci: level outside (0,1)");
  double tot = s.total_weight();
  double mean = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    mean += (s.weights.empty() ? 1.0 : s.weights[i]) * s.values[i];
  mean /= tot;
  double ne = s.effective_size();
  double var = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    double w = s.weights.empty() ? 1.0 : s.weights[i];
    double d = s.values[i] - mean;
    var += w * w * d * d;
  }
  double se = 0.0;
  if (ne > 1.0) se = std::sqrt(var * ne / (ne - 1.0)) / tot;
  double z = normal_quantile(0.5 + level / 2.0);
  return {mean, z * se, se};
}

inline MeanCi mean_ci(const std::vector<double>& xs, double level = 0.95) {
  return mean_ci(EmpiricalSample{xs, {}}, level);
}

// upper regularized incomplete gamma Q(a, x), series + continued fraction
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {  // P by series, Q = 1 - P
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Lentz continued fraction for Q
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

// chi-square test of uniformity over the categories of `counts`
inline ChiSquareResult chi_square_uniform(const std::vector<std::uint64_t>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi_square_uniform: need at least two categories");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total == 0.0) throw std::invalid_argument("chi_square_uniform: empty counts");
  double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  std::size_t dof = counts.size() - 1;
  return {stat, gamma_q(static_cast<double>(dof) / 2.0, stat / 2.0), dof};
}

}  // namespace brwx::stats
