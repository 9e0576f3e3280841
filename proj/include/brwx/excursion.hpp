#pragma once

// Reference laws on the unit interval: normalized Brownian excursion (as the
// modulus of three independent Brownian bridges, i.e. a 3d Bessel bridge),
// Brownian meander (as a 3d Bessel path reweighted by sqrt(pi/2)/R_1), and
// the identity transporting meander functionals to excursion functionals
//   (1/((1-D) sqrt(D))) E[F(sqrt(D) M_{s/D}) psi(sqrt(D) M_1 / sqrt(1-D))]
//     = sqrt(pi/2) E[F(e_s; s <= D)],        psi(x) = x e^{-x^2/2}.
// Bridges are filled by midpoint refinement with the exact conditional
// Gaussians, so every grid marginal is exactly Gaussian at any grid size.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "brwx/pathgrid.hpp"
#include "brwx/rng.hpp"

namespace brwx::excursion {

namespace detail {

// fill values[lo..hi] of a Brownian motion on the uniform grid given pinned
// endpoints, by recursive midpoint bisection (exact conditional law)
inline void fill_bridge(std::vector<double>& v, int lo, int hi, double dt, std::normal_distribution<double>& nd,
                        rng::Engine& eng) {
  if (hi - lo < 2) return;
  int mid = (lo + hi) / 2;
  double tl = lo * dt, tm = mid * dt, th = hi * dt;
  double mean = v[static_cast<std::size_t>(lo)] +
                (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]) * (tm - tl) / (th - tl);
  double var = (tm - tl) * (th - tm) / (th - tl);
  v[static_cast<std::size_t>(mid)] = mean + std::sqrt(var) * nd(eng);
  fill_bridge(v, lo, mid, dt, nd, eng);
  fill_bridge(v, mid, hi, dt, nd, eng);
}

inline std::vector<double> brownian_bridge(int grid, rng::Engine& eng) {
  std::vector<double> v(static_cast<std::size_t>(grid) + 1, 0.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  fill_bridge(v, 0, grid, 1.0 / grid, nd, eng);
  return v;
}

inline std::vector<double> brownian_motion(int grid, rng::Engine& eng) {
  std::vector<double> v(static_cast<std::size_t>(grid) + 1, 0.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  double sdt = std::sqrt(1.0 / grid);
  for (int j = 1; j <= grid; ++j) v[static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(j) - 1] + sdt * nd(eng);
  return v;
}

}  // namespace detail

// normalized Brownian excursion == standard 3d Bessel bridge
inline PathGrid sample_excursion(int grid, rng::Engine& eng) {
  if (grid < 2) throw std::invalid_argument("sample_excursion: grid < 2");
  auto b1 = detail::brownian_bridge(grid, eng);
  auto b2 = detail::brownian_bridge(grid, eng);
  auto b3 = detail::brownian_bridge(grid, eng);
  PathGrid p;
  p.grid_size = grid;
  p.values.resize(static_cast<std::size_t>(grid) + 1);
  for (std::size_t j = 0; j < p.values.size(); ++j)
    p.values[j] = std::sqrt(b1[j] * b1[j] + b2[j] * b2[j] + b3[j] * b3[j]);
  p.values.front() = 0.0;
  p.values.back() = 0.0;
  return p;
}

// 3d Bessel path from 0 (modulus of a 3d Brownian motion)
inline PathGrid sample_bessel3(int grid, rng::Engine& eng) {
  if (grid < 2) throw std::invalid_argument("sample_bessel3: grid < 2");
  auto b1 = detail::brownian_motion(grid, eng);
  auto b2 = detail::brownian_motion(grid, eng);
  auto b3 = detail::brownian_motion(grid, eng);
  PathGrid p;
  p.grid_size = grid;
  p.values.resize(static_cast<std::size_t>(grid) + 1);
  for (std::size_t j = 0; j < p.values.size(); ++j)
    p.values[j] = std::sqrt(b1[j] * b1[j] + b2[j] * b2[j] + b3[j] * b3[j]);
  return p;
}

// Brownian meander by the Imhof relation: a Bessel(3) path carrying weight
// sqrt(pi/2)/R_1; weighted averages of functionals estimate meander
// expectations (the weights themselves average to 1).
inline PathGrid sample_meander(int grid, rng::Engine& eng) {
  PathGrid p = sample_bessel3(grid, eng);
  double r1 = p.values.back();
  p.weight = std::sqrt(std::numbers::pi / 2.0) / r1;
  return p;
}

inline double psi_kernel(double x) { return x >= 0.0 ? x * std::exp(-x * x / 2.0) : 0.0; }

// functional on a path restricted to [0, Delta]; receives the restricted
// values on a uniform sub-grid of [0, Delta] (right-continuous lookup)
using RestrictedFunctional = std::function<double(std::span<const double>, double)>;

struct IdentityResult {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
};

namespace detail {

inline void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  se = std::sqrt(v / static_cast<double>(xs.size())) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace detail

// Both sides of the meander-to-excursion identity, estimated on `samples`
// draws each at grid `grid`. F bounded into [0,1].
inline IdentityResult meander_excursion_identity(double delta, const RestrictedFunctional& F, int samples,
                                                 int grid, rng::Engine& eng) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("identity: delta outside (0,1)");
  if (grid < 4) throw std::invalid_argument("identity: grid too small");
  int sub = std::max(2, static_cast<int>(std::lround(grid * delta)));
  std::vector<double> restricted(static_cast<std::size_t>(sub) + 1);
  std::vector<double> lhs_vals, rhs_vals;
  lhs_vals.reserve(static_cast<std::size_t>(samples));
  rhs_vals.reserve(static_cast<std::size_t>(samples));
  double pref = 1.0 / ((1.0 - delta) * std::sqrt(delta));
  double scale_end = std::sqrt(delta) / std::sqrt(1.0 - delta);
  for (int it = 0; it < samples; ++it) {
    PathGrid m = sample_meander(grid, eng);
    // restricted path s in [0, Delta]: sqrt(Delta) * M_{s/Delta}
    for (int j = 0; j <= sub; ++j) {
      double u = (static_cast<double>(j) / sub);  // time s/Delta in [0,1]
      restricted[static_cast<std::size_t>(j)] = std::sqrt(delta) * m.at(u);
    }
    double f = F(restricted, delta);
    lhs_vals.push_back(pref * m.weight * f * psi_kernel(scale_end * m.values.back()));
  }
  double rhs_factor = std::sqrt(std::numbers::pi / 2.0);
  for (int it = 0; it < samples; ++it) {
    PathGrid e = sample_excursion(grid, eng);
    for (int j = 0; j <= sub; ++j) {
      double s = delta * static_cast<double>(j) / sub;
      restricted[static_cast<std::size_t>(j)] = e.at(s);
    }
    rhs_vals.push_back(rhs_factor * F(restricted, delta));
  }
  IdentityResult out;
  detail::mean_se(lhs_vals, out.lhs, out.lhs_se);
  detail::mean_se(rhs_vals, out.rhs, out.rhs_se);
  return out;
}

// marginal of the normalized excursion at interior time s:
//   density 2 x^2 e^{-x^2/(2v)} / sqrt(2 pi v^3),  v = s(1-s),  x > 0
struct ExcursionMarginal {
  double s = 0.5;
  double v = 0.25;

  explicit ExcursionMarginal(double time) : s(time), v(time * (1.0 - time)) {
    if (!(time > 0.0 && time < 1.0)) throw std::invalid_argument("excursion_marginal: s outside (0,1)");
  }
  double pdf(double x) const {
    if (x <= 0.0) return 0.0;
    return 2.0 * x * x * std::exp(-x * x / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v * v * v);
  }
  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return std::erf(x / std::sqrt(2.0 * v)) -
           x * std::sqrt(2.0 / (std::numbers::pi * v)) * std::exp(-x * x / (2.0 * v));
  }
  double mean() const { return 4.0 * std::sqrt(v) / std::sqrt(2.0 * std::numbers::pi); }
};

inline ExcursionMarginal excursion_marginal(double s) { return ExcursionMarginal(s); }

// density factor tying a Bessel(3) path restricted to [0, Delta] to the
// excursion restriction: (1-Delta)^{-3/2} exp(-R_Delta^2 / (2(1-Delta)))
inline double bessel_restriction_weight(const PathGrid& bessel, double delta) {
  double r = bessel.at(delta);
  return std::pow(1.0 - delta, -1.5) * std::exp(-r * r / (2.0 * (1.0 - delta)));
}

}  // namespace brwx::excursion
