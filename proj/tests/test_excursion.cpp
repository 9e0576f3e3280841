#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "brwx/excursion.hpp"
#include "brwx/rng.hpp"
#include "brwx/stats.hpp"

using namespace brwx;

namespace {
constexpr double kSqrtPiOver2 = 1.2533141373155003;  // sqrt(pi/2)
}

TEST_CASE("excursion endpoints and positivity", "[excursion]") {
  rng::Engine eng = rng::make_engine(30, 0);
  for (int i = 0; i < 500; ++i) {
    PathGrid e = excursion::sample_excursion(64, eng);
    CHECK(e.values.front() == 0.0);
    CHECK(e.values.back() == 0.0);
    for (std::size_t j = 1; j + 1 < e.values.size(); ++j) CHECK(e.values[j] > 0.0);
  }
  CHECK_THROWS_AS(excursion::sample_excursion(1, eng), std::invalid_argument);
}

TEST_CASE("bridge marginals are exactly Gaussian, path moments check out", "[excursion]") {
  rng::Engine eng = rng::make_engine(31, 0);
  int reps = 100000, grid = 16;
  // E[e_s^2] = 3 s(1-s) for the three-bridge modulus; E[R_s^2] = 3s
  double sum_e2 = 0.0, sum_r2 = 0.0;
  double s = 5.0 / 16.0;
  for (int i = 0; i < reps; ++i) {
    double ev = excursion::sample_excursion(grid, eng).at(s);
    double rv = excursion::sample_bessel3(grid, eng).at(s);
    sum_e2 += ev * ev;
    sum_r2 += rv * rv;
  }
  // fourth moments give the CLT bands: Var(chi2_3) = 6 scale^2
  double band_e = 4.0 * std::sqrt(6.0) * s * (1 - s) / std::sqrt(static_cast<double>(reps));
  double band_r = 4.0 * std::sqrt(6.0) * s / std::sqrt(static_cast<double>(reps));
  CHECK(std::fabs(sum_e2 / reps - 3.0 * s * (1 - s)) < band_e);
  CHECK(std::fabs(sum_r2 / reps - 3.0 * s) < band_r);
}

TEST_CASE("excursion midpoint mean", "[excursion]") {
  rng::Engine eng = rng::make_engine(32, 0);
  int reps = 100000;
  double sum = 0.0;
  for (int i = 0; i < reps; ++i) sum += excursion::sample_excursion(32, eng).at(0.5);
  double mean = sum / reps;
  double target = 2.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(std::fabs(mean - target) < 0.01 * target);
}

TEST_CASE("time-reversal symmetry of the excursion", "[excursion]") {
  rng::Engine eng = rng::make_engine(33, 0);
  int reps = 100000;
  std::vector<double> q1(reps), q3(reps);
  for (int i = 0; i < reps; ++i) {
    PathGrid e = excursion::sample_excursion(32, eng);
    q1[static_cast<std::size_t>(i)] = e.at(0.25);
    PathGrid e2 = excursion::sample_excursion(32, eng);
    q3[static_cast<std::size_t>(i)] = e2.at(0.75);
  }
  CHECK(stats::ks_two_sample(q1, q3).p_value > 0.01);
}

TEST_CASE("meander weights and endpoint", "[excursion]") {
  rng::Engine eng = rng::make_engine(34, 0);
  int reps = 100000;
  std::vector<double> weights(reps);
  for (int i = 0; i < reps; ++i) {
    PathGrid m = excursion::sample_meander(64, eng);
    weights[static_cast<std::size_t>(i)] = m.weight;
    // the weighted endpoint is constant: weight * R_1 = sqrt(pi/2) identically
    CHECK(m.weight * m.values.back() == Catch::Approx(kSqrtPiOver2).margin(1e-12));
  }
  auto ci = stats::mean_ci(weights);
  CHECK(std::fabs(ci.mean - 1.0) < 3.0 * ci.se);
}

TEST_CASE("meander-to-excursion identity, constant functional", "[excursion]") {
  auto one = [](std::span<const double>, double) { return 1.0; };
  for (double delta : {0.25, 0.5}) {
    rng::Engine eng = rng::make_engine(35, static_cast<std::uint64_t>(delta * 4));
    auto res = excursion::meander_excursion_identity(delta, one, 40000, 256, eng);
    CHECK(std::fabs(res.lhs - kSqrtPiOver2) < 0.02 * kSqrtPiOver2);
    CHECK(std::fabs(res.rhs - kSqrtPiOver2) < 1e-12);  // exact for F == 1
  }
}

TEST_CASE("meander-to-excursion identity, functional battery", "[excursion]") {
  using F = excursion::RestrictedFunctional;
  std::vector<F> battery = {
      [](std::span<const double>, double) { return 1.0; },
      [](std::span<const double> v, double) { return v[v.size() / 2] <= 0.5 ? 1.0 : 0.0; },
      [](std::span<const double> v, double) { return std::min(1.0, v[v.size() / 2]); },
      [](std::span<const double> v, double) {
        double mx = 0.0;
        for (double x : v) mx = std::max(mx, x);
        return mx <= 1.0 ? 1.0 : 0.0;
      },
      [](std::span<const double> v, double) { return std::exp(-v[v.size() / 4]); },
  };
  double delta = 0.5;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    rng::Engine eng = rng::make_engine(36, i);
    auto res = excursion::meander_excursion_identity(delta, battery[i], 40000, 256, eng);
    INFO("functional " << i << ": lhs " << res.lhs << " rhs " << res.rhs);
    CHECK(std::fabs(res.lhs - res.rhs) < 3.0 * (res.lhs_se + res.rhs_se));
  }
}

TEST_CASE("excursion marginal density", "[excursion]") {
  auto m = excursion::excursion_marginal(0.5);
  CHECK(m.mean() == Catch::Approx(2.0 / std::sqrt(2.0 * std::numbers::pi)).margin(1e-15));
  CHECK(m.mean() == Catch::Approx(0.79788).margin(1e-5));

  // normalization by Simpson quadrature
  for (double s : {0.1, 0.5, 0.9}) {
    auto ms = excursion::excursion_marginal(s);
    int steps = 4000;
    double hi = 8.0, h = hi / steps, integral = ms.pdf(0.0) + ms.pdf(hi);
    for (int k = 1; k < steps; ++k) integral += ms.pdf(k * h) * ((k % 2) ? 4.0 : 2.0);
    integral *= h / 3.0;
    CHECK(std::fabs(integral - 1.0) < 1e-8);
    // cdf' = pdf
    for (double x : {0.3, 0.9, 1.7}) {
      double d = (ms.cdf(x + 1e-6) - ms.cdf(x - 1e-6)) / 2e-6;
      CHECK(d == Catch::Approx(ms.pdf(x)).margin(1e-5));
    }
    CHECK(ms.cdf(50.0) == Catch::Approx(1.0).margin(1e-12));
  }
  CHECK_THROWS_AS(excursion::excursion_marginal(0.0), std::invalid_argument);
  CHECK_THROWS_AS(excursion::excursion_marginal(1.0), std::invalid_argument);
}

TEST_CASE("sampler against the closed-form marginal", "[excursion]") {
  rng::Engine eng = rng::make_engine(37, 0);
  int reps = 20000;
  std::vector<double> xs(reps);
  for (int i = 0; i < reps; ++i) xs[static_cast<std::size_t>(i)] = excursion::sample_excursion(32, eng).at(0.5);
  auto m = excursion::excursion_marginal(0.5);
  auto ks = stats::ks_one_sample(xs, [&](double x) { return m.cdf(x); });
  CHECK(ks.statistic < 1.95 / std::sqrt(static_cast<double>(reps)) * 1.5);
}

TEST_CASE("Bessel-bridge restriction reproduces the excursion", "[excursion]") {
  double delta = 0.5;
  rng::Engine eng = rng::make_engine(38, 0);
  int reps = 40000;
  stats::EmpiricalSample weighted;
  std::vector<double> direct(reps);
  for (int i = 0; i < reps; ++i) {
    PathGrid b = excursion::sample_bessel3(64, eng);
    weighted.values.push_back(b.at(delta / 2.0));
    weighted.weights.push_back(excursion::bessel_restriction_weight(b, delta));
    direct[static_cast<std::size_t>(i)] = excursion::sample_excursion(64, eng).at(delta / 2.0);
  }
  auto ci = stats::mean_ci(stats::EmpiricalSample{weighted.weights, {}});
  CHECK(std::fabs(ci.mean - 1.0) < 3.0 * ci.se);  // the density factor integrates to one
  auto ks = stats::ks_two_sample(weighted, stats::EmpiricalSample{direct, {}});
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("path grid lookup conventions", "[excursion]") {
  PathGrid g;
  g.grid_size = 4;
  g.values = {0.0, 1.0, 2.0, 3.0, 4.0};
  CHECK(g.at(0.0) == 0.0);
  CHECK(g.at(1.0) == 4.0);
  CHECK(g.at(0.5) == 2.0);
  CHECK(g.at(0.26) == 1.0);  // right-continuous step lookup
  CHECK(g.at(0.24) == 0.0);
  auto c = g.coarsen(2);
  CHECK(c.values == std::vector<double>{0.0, 2.0, 4.0});
  CHECK_THROWS_AS(g.coarsen(3), std::invalid_argument);
}
