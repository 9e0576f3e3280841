#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "brwx/law_io.hpp"
#include "brwx/model.hpp"
#include "brwx/rng.hpp"

using namespace brwx;
using model::OffspringLaw;

namespace {

OffspringLaw one_child_at(double x) { return OffspringLaw::from_atoms({model::Atom{1.0, {x}}}); }

OffspringLaw two_children_at_zero() { return OffspringLaw::from_atoms({model::Atom{1.0, {0.0, 0.0}}}); }

const double kC2 = std::acosh(2.0);  // ln(2 + sqrt 3)

}  // namespace

TEST_CASE("log_laplace on trivial laws", "[model]") {
  for (double theta : {-1.0, 0.0, 0.7, 3.0}) CHECK(one_child_at(0.0).log_laplace(theta) == 0.0);
  CHECK(two_children_at_zero().log_laplace(1.0) == Catch::Approx(std::log(2.0)).margin(1e-14));
  CHECK(std::fabs(model::cosh_family(2.0).log_laplace(1.0)) < 1e-12);
}

TEST_CASE("boundary verdicts", "[model]") {
  auto r1 = model::check_boundary(one_child_at(0.0));
  CHECK_FALSE(r1.supercritical);  // m = 1
  CHECK(r1.normalized);
  CHECK_FALSE(r1.pass());

  auto r2 = model::check_boundary(two_children_at_zero());
  CHECK(r2.supercritical);
  CHECK_FALSE(r2.normalized);
  CHECK(r2.psi1 == Catch::Approx(std::log(2.0)).margin(1e-14));

  CHECK(model::check_boundary(model::cosh_family(2.0), 1e-12).pass());
  CHECK(model::check_boundary(model::bin2_family(std::log(4.0)), 1e-12).pass());
}

TEST_CASE("sigma closed forms", "[model]") {
  CHECK(model::sigma(model::cosh_family(2.0)) == Catch::Approx(kC2).margin(1e-12));
  CHECK(model::sigma(model::cosh_family(2.0)) == Catch::Approx(1.3169578969).margin(1e-9));
  CHECK(model::sigma(model::cosh_family(1.2)) == Catch::Approx(std::acosh(1.2)).margin(1e-12));
  CHECK_THROWS_AS(model::sigma(one_child_at(0.0)), std::invalid_argument);
}

TEST_CASE("x-moment fields", "[model]") {
  // X = 2 deterministically, so E[X (log+ X)^2] = 2 ln(2)^2; Xt = 0
  auto r = model::check_boundary(two_children_at_zero());
  CHECK(r.x_log2_moment == Catch::Approx(2.0 * std::log(2.0) * std::log(2.0)).margin(1e-14));
  CHECK(r.xtilde_log_moment == 0.0);
  CHECK(r.integrable);
}

TEST_CASE("lattice structure detection", "[model]") {
  auto cosh2 = model::lattice_structure(model::cosh_family(2.0));
  REQUIRE(cosh2.lattice);
  CHECK(cosh2.span == Catch::Approx(2.0 * kC2).margin(1e-12));
  CHECK(cosh2.offset == Catch::Approx(kC2).margin(1e-12));

  // two-point support with incommensurable offset/span ratio
  CHECK_FALSE(model::lattice_structure(model::bin2_family(std::log(4.0))).lattice);

  auto single = model::lattice_structure(one_child_at(0.0));
  REQUIRE(single.lattice);
  CHECK(single.span == 1.0);
  CHECK(single.offset == 0.0);

  auto grid = model::lattice_structure(
      OffspringLaw::from_atoms({model::Atom{0.5, {0.0, 2.0}}, model::Atom{0.5, {1.0}}}));
  REQUIRE(grid.lattice);
  CHECK(grid.span == Catch::Approx(1.0).margin(1e-12));
  CHECK(grid.offset == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("product and explicit representations agree", "[model]") {
  OffspringLaw prod = model::cosh_family(1.2);
  OffspringLaw expl = prod.expanded();
  for (double theta : {0.3, 1.0, 2.0})
    CHECK(prod.log_laplace(theta) == Catch::Approx(expl.log_laplace(theta)).margin(1e-12));
  CHECK(prod.sigma2() == Catch::Approx(expl.sigma2()).margin(1e-12));
  CHECK(prod.mean_offspring() == Catch::Approx(expl.mean_offspring()).margin(1e-12));
  CHECK(prod.x_log2_moment() == Catch::Approx(expl.x_log2_moment()).margin(1e-12));
  auto lp = model::lattice_structure(prod);
  auto le = model::lattice_structure(expl);
  CHECK(lp.lattice == le.lattice);
  CHECK(lp.span == Catch::Approx(le.span).margin(1e-12));
  CHECK(lp.offset == Catch::Approx(le.offset).margin(1e-12));
}

TEST_CASE("calibration of a tilted binary law", "[model]") {
  // two children, displacement -1 w.p. 1/4: half an expected child at the
  // minimal displacement, so a tangent point exists
  OffspringLaw raw = OffspringLaw::product({{2}, {1.0}}, {{-1.0, 1.0}, {0.25, 0.75}});
  OffspringLaw cal = model::calibrate(raw);
  CHECK(model::check_boundary(cal, 1e-10).pass());

  // independent bisection oracle: g(t) = t M'(t)/M(t) - ln M(t) with
  // M(t) = 2(0.25 e^{t} + 0.75 e^{-t})
  auto g = [](double t) {
    double M = 2.0 * (0.25 * std::exp(t) + 0.75 * std::exp(-t));
    double Mp = 2.0 * (0.25 * std::exp(t) - 0.75 * std::exp(-t));
    return t * (Mp / M) - std::log(M);
  };
  double lo = 1e-3, hi = 50.0;
  REQUIRE(g(lo) < 0.0);
  REQUIRE(g(hi) > 0.0);
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (g(mid) <= 0.0 ? lo : hi) = mid;
  }
  double theta = 0.5 * (lo + hi);
  double shift = std::log(2.0 * (0.25 * std::exp(theta) + 0.75 * std::exp(-theta)));
  const auto& disp = cal.displacement_dist();
  CHECK(disp.values[0] == Catch::Approx(-theta + shift).margin(1e-8));
  CHECK(disp.values[1] == Catch::Approx(theta + shift).margin(1e-8));
}

TEST_CASE("calibration edge cases", "[model]") {
  // already-boundary law is a fixed point
  OffspringLaw cosh2 = model::cosh_family(2.0);
  OffspringLaw cal = model::calibrate(cosh2);
  for (std::size_t i = 0; i < cosh2.displacement_dist().values.size(); ++i)
    CHECK(cal.displacement_dist().values[i] ==
          Catch::Approx(cosh2.displacement_dist().values[i]).margin(1e-10));

  // idempotence
  OffspringLaw raw = OffspringLaw::product({{2}, {1.0}}, {{-1.0, 1.0}, {0.25, 0.75}});
  OffspringLaw c1 = model::calibrate(raw);
  OffspringLaw c2 = model::calibrate(c1);
  for (std::size_t i = 0; i < c1.displacement_dist().values.size(); ++i)
    CHECK(c2.displacement_dist().values[i] == Catch::Approx(c1.displacement_dist().values[i]).margin(1e-10));

  CHECK_THROWS_AS(model::calibrate(one_child_at(0.0)), model::CalibrationFailure);

  // symmetric binary branching carries exactly one expected child at the
  // minimal displacement: the tangent equation t tanh t = ln(2 cosh t) has
  // its root at infinity, and the bisection saturates at the bracket edge.
  // The output is the degenerate boundary law {0, 2 theta} and still passes
  // the verdicts.
  OffspringLaw sym = OffspringLaw::product({{2}, {1.0}}, {{-1.0, 1.0}, {0.5, 0.5}});
  OffspringLaw lim = model::calibrate(sym);
  CHECK(model::check_boundary(lim, 1e-10).pass());
  CHECK(lim.displacement_dist().values[0] == Catch::Approx(0.0).margin(1e-9));

  // a subcritical minimal count below one but overall subcritical law fails
  OffspringLaw sub = OffspringLaw::product({{1}, {1.0}}, {{-1.0, 1.0}, {0.25, 0.75}});
  CHECK_THROWS_AS(model::calibrate(sub), model::CalibrationFailure);
}

TEST_CASE("cosh family construction", "[model]") {
  OffspringLaw law = model::cosh_family(2.0);
  CHECK(law.displacement_dist().probs[0] == Catch::Approx((2.0 - std::sqrt(3.0)) / 4.0).margin(1e-15));
  CHECK(law.count_dist().values == std::vector<int>{2});
  OffspringLaw law12 = model::cosh_family(1.2);
  CHECK(law12.displacement_dist().values[1] == Catch::Approx(0.6223625037).margin(1e-9));
  CHECK(law12.count_dist().values == std::vector<int>{1, 2});
  CHECK(law12.mean_offspring() == Catch::Approx(1.2).margin(1e-14));
  CHECK_THROWS_AS(model::cosh_family(1.0), std::invalid_argument);
}

TEST_CASE("offspring sampling matches the law", "[model]") {
  rng::Engine eng = rng::make_engine(42, 0);
  for (int i = 0; i < 100; ++i) {
    auto ch = one_child_at(0.0).sample(eng);
    REQUIRE(ch.size() == 1);
    CHECK(ch[0] == 0.0);
  }

  OffspringLaw cosh2 = model::cosh_family(2.0);
  double p = cosh2.displacement_dist().probs[0];
  std::uint64_t down = 0, total = 0;
  std::vector<double> ch;
  for (int i = 0; i < 500'000; ++i) {
    cosh2.sample_into(eng, ch);
    REQUIRE(ch.size() == 2);
    for (double d : ch) {
      ++total;
      down += d < 0.0;
    }
  }
  double freq = static_cast<double>(down) / static_cast<double>(total);
  CHECK(std::fabs(freq - p) < 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(total)));

  // empty offspring happens with the count law's P(N=0)
  OffspringLaw maybe_none = OffspringLaw::product({{0, 1}, {0.5, 0.5}}, {{0.0}, {1.0}});
  std::uint64_t empty = 0;
  int reps = 200'000;
  for (int i = 0; i < reps; ++i) {
    maybe_none.sample_into(eng, ch);
    empty += ch.empty();
  }
  CHECK(std::fabs(static_cast<double>(empty) / reps - 0.5) < 4.0 * std::sqrt(0.25 / reps));
}

TEST_CASE("law files round-trip and cite error paths", "[model]") {
  OffspringLaw law = model::bin2_family(std::log(4.0));
  auto j = model::law_to_json(law);
  OffspringLaw back = model::law_from_json(j);
  CHECK(back.log_laplace(1.0) == Catch::Approx(law.log_laplace(1.0)).margin(1e-15));
  CHECK(back.sigma2() == Catch::Approx(law.sigma2()).margin(1e-15));

  auto expl = model::law_to_json(law.expanded());
  CHECK(model::law_from_json(expl).sigma2() == Catch::Approx(law.sigma2()).margin(1e-12));

  using nlohmann::json;
  CHECK_THROWS_WITH(model::law_from_json(json::parse(R"({"form":"explicit-atoms","atoms":[{"children":[0]}]})")),
                    Catch::Matchers::ContainsSubstring("/atoms/0/prob"));
  CHECK_THROWS_WITH(model::law_from_json(json::parse(R"({"form":"product","count":{"values":[1],"probs":[1.0]}})")),
                    Catch::Matchers::ContainsSubstring("/displacement"));
  CHECK_THROWS_WITH(
      model::law_from_json(json::parse(R"({"form":"explicit-atoms","atoms":[{"prob":0.5,"children":[0]}]})")),
      Catch::Matchers::ContainsSubstring("sum to 1"));
  CHECK_THROWS_AS(model::law_from_json(json::parse(R"({"form":"banana"})")), model::LawParseError);
}

TEST_CASE("boundary identities recomputed through expansion", "[model]") {
  for (const auto& law : {model::cosh_family(2.0), model::cosh_family(1.2), model::bin2_family(std::log(4.0))}) {
    OffspringLaw expl = law.expanded();
    CHECK(std::fabs(expl.log_laplace(1.0)) < 1e-12);
    CHECK(std::fabs(expl.tilt_mean(1.0)) < 1e-12);
  }
}
