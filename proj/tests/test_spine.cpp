#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "brwx/exact.hpp"
#include "brwx/model.hpp"
#include "brwx/spine.hpp"
#include "brwx/spine_aggregate.hpp"
#include "brwx/stats.hpp"

using namespace brwx;

namespace {
// taken from the law so lattice comparisons are bit-exact (a folded
// acosh(2.0) constant can differ from the libm value by one ulp)
const double kC = model::cosh_family(2.0).displacement_dist().values[1];
}

TEST_CASE("size-biased reweighting of atoms", "[spine]") {
  // a single child at 0 is a fixed point of the reweighting
  auto trivial = model::OffspringLaw::from_atoms({model::Atom{1.0, {0.0}}});
  auto sb0 = spine::size_bias(trivial);
  REQUIRE(sb0.atoms.size() == 1);
  CHECK(sb0.atoms[0].prob == Catch::Approx(1.0).margin(1e-15));
  CHECK(sb0.atoms[0].children == std::vector<double>{0.0});

  auto law = model::cosh_family(2.0);
  auto sb = spine::size_bias(law);
  double p = law.displacement_dist().probs[0];
  // ordered expansion puts the (-c, -c) atom first; its weight is 2 e^{c}
  REQUIRE(sb.atoms.size() == 4);
  CHECK(sb.atoms[0].children == std::vector<double>{-kC, -kC});
  CHECK(sb.atoms[0].prob == Catch::Approx(p * p * 2.0 * std::exp(kC)).margin(1e-12));
  CHECK(sb.atoms[0].prob == Catch::Approx((2.0 - std::sqrt(3.0)) / 8.0).margin(1e-12));

  for (const auto& fixture : {model::cosh_family(2.0), model::cosh_family(1.2), model::bin2_family(std::log(4.0))}) {
    double total = 0.0;
    for (const auto& a : spine::size_bias(fixture).atoms) total += a.prob;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
  }

  CHECK_THROWS_AS(spine::size_bias(model::OffspringLaw::from_atoms({model::Atom{1.0, {0.0, 0.0}}})),
                  std::invalid_argument);
}

TEST_CASE("spine child choice probabilities", "[spine]") {
  // single-child atoms always hand the spine to their only child
  auto trivial = spine::size_bias(model::OffspringLaw::from_atoms({model::Atom{1.0, {0.0}}}));
  rng::Engine eng = rng::make_engine(20, 0);
  for (int i = 0; i < 50; ++i) CHECK(spine::sample_spine_step(trivial, 1.0, eng).spine_index == 0);

  // mixed atom (-c, +c): P(index of the -c child) = e^{c}/(e^{c} + e^{-c})
  auto sb = spine::size_bias(model::cosh_family(2.0));
  double p_low = std::exp(kC) / (std::exp(kC) + std::exp(-kC));
  std::uint64_t low = 0, mixed = 0;
  std::uint64_t downs = 0;
  int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    auto step = spine::sample_spine_step(sb, 0.0, eng);
    double chosen = step.children[step.spine_index];
    downs += chosen < 0.0;
    if (step.children[0] != step.children[1]) {
      ++mixed;
      double lo = std::min(step.children[0], step.children[1]);
      low += chosen == lo;
    }
  }
  double f_mixed = static_cast<double>(low) / static_cast<double>(mixed);
  CHECK(std::fabs(f_mixed - p_low) < 4.0 * std::sqrt(p_low * (1.0 - p_low) / static_cast<double>(mixed)));
  // marginal spine displacement is the centered step law: half down
  double f_down = static_cast<double>(downs) / steps;
  CHECK(std::fabs(f_down - 0.5) < 4.0 * std::sqrt(0.25 / steps));
}

TEST_CASE("spine runs", "[spine]") {
  auto law = model::cosh_family(2.0);
  rng::Engine eng = rng::make_engine(21, 0);
  auto run0 = spine::simulate_spine(law, 0, 1.5, eng);
  CHECK(run0.positions == std::vector<double>{1.5});

  // i.i.d. increments: lag-1 autocorrelation within the CLT band
  auto run = spine::simulate_spine(law, 100000, 0.0, eng);
  std::vector<double> inc(run.positions.size() - 1);
  for (std::size_t i = 0; i + 1 < run.positions.size(); ++i) inc[i] = run.positions[i + 1] - run.positions[i];
  double mean = 0.0;
  for (double x : inc) mean += x;
  mean /= static_cast<double>(inc.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < inc.size(); ++i) num += (inc[i] - mean) * (inc[i + 1] - mean);
  for (double x : inc) den += (x - mean) * (x - mean);
  double rho = num / den;
  CHECK(std::fabs(rho) < 4.0 / std::sqrt(static_cast<double>(inc.size())));
}

TEST_CASE("spine marginal matches the size-biased tree law", "[spine]") {
  auto law = model::cosh_family(2.0);
  exact::QLaw q = exact::exact_q_law(law, 2);
  // marginal of (V(w_1), V(w_2)) under the exact size-biased law
  std::map<std::pair<long long, long long>, double> expected;
  for (const auto& a : q.atoms) {
    const auto& t = q.trees[a.tree];
    std::size_t leaf = a.leaf;
    double v2 = t.pos[2][leaf];
    double v1 = t.pos[1][t.parent[2][leaf]];
    expected[{std::llround(v1 / kC), std::llround(v2 / kC)}] += a.prob;
  }

  // spine-only sampler
  std::map<std::pair<long long, long long>, double> emp;
  int reps = 1000000;
  for (int r = 0; r < reps; ++r) {
    rng::Engine e = rng::make_engine(200, static_cast<std::uint64_t>(r));
    auto run = spine::simulate_spine(law, 2, 0.0, e);
    emp[{std::llround(run.positions[1] / kC), std::llround(run.positions[2] / kC)}] += 1.0 / reps;
  }
  double tv = 0.0;
  for (const auto& [k, p] : expected) tv += std::fabs(p - (emp.count(k) ? emp.at(k) : 0.0));
  CHECK(tv / 2.0 < 5e-3);

  // materialized sampler has the same spine marginal and consistent bookkeeping
  std::map<std::pair<long long, long long>, double> emp_mat;
  int reps2 = 100000;
  for (int r = 0; r < reps2; ++r) {
    rng::Engine e = rng::make_engine(201, static_cast<std::uint64_t>(r));
    auto run = spine::simulate_spine(law, 2, 0.0, e, /*materialize=*/true);
    REQUIRE(run.tree.has_value());
    REQUIRE(run.spine_node.size() == 3);
    for (int g = 0; g <= 2; ++g)
      CHECK(run.tree->position(g, run.spine_node[static_cast<std::size_t>(g)]) ==
            Catch::Approx(run.positions[static_cast<std::size_t>(g)]).margin(1e-12));
    // ln W_n recomputed from the tree agrees
    numeric::Kahan w;
    for (double p : run.tree->gens.back().pos) w.add(std::exp(-p));
    CHECK(std::log(w.value()) == Catch::Approx(run.log_W).margin(1e-12));
    emp_mat[{std::llround(run.positions[1] / kC), std::llround(run.positions[2] / kC)}] += 1.0 / reps2;
  }
  double tv2 = 0.0;
  for (const auto& [k, p] : expected) tv2 += std::fabs(p - (emp_mat.count(k) ? emp_mat.at(k) : 0.0));
  CHECK(tv2 / 2.0 < 1.5e-2);
}

TEST_CASE("importance estimates against exact values", "[spine]") {
  auto law = model::cosh_family(2.0);

  // change of measure back: E_Q[W_n^{-1}] = P(survival) = 1 for this family
  auto all = spine::importance_estimate(
      law, 6, [](const brw::TreeRun&) { return true; }, 20000, {}, 300);
  CHECK(std::fabs(all.estimate - 1.0) < 3.0 * all.se);
  CHECK(all.excluded == 0);

  // P(I_1 <= -c) = 2p - p^2
  double p = law.displacement_dist().probs[0];
  double truth = 2.0 * p - p * p;
  auto est = spine::importance_estimate(
      law, 1, [](const brw::TreeRun& t) { return t.I.back() <= -kC + 1e-9; }, 20000, {}, 301);
  CHECK(std::fabs(est.estimate - truth) < 3.0 * est.se);
  CHECK(truth == Catch::Approx(0.1295).margin(5e-5));

  // deeper event against the lattice recursion and against direct Monte Carlo
  auto lat = model::lattice_structure(law);
  double threshold = brw::a_n(1.0, 3, lat);
  double exact_p = exact::min_cdf_lattice(law, 3).prob_le(threshold + 1e-12);
  auto est3 = spine::importance_estimate(
      law, 3, [threshold](const brw::TreeRun& t) { return t.I.back() <= threshold + 1e-12; }, 40000, {}, 302);
  CHECK(std::fabs(est3.estimate - exact_p) < 3.0 * est3.se);
  {
    int reps = 40000;
    std::uint64_t hits = 0;
    for (int r = 0; r < reps; ++r) {
      rng::Engine e = rng::make_engine(303, static_cast<std::uint64_t>(r));
      hits += brw::simulate(law, 3, {}, e).I.back() <= threshold + 1e-12;
    }
    double direct = static_cast<double>(hits) / reps;
    double se_direct = std::sqrt(direct * (1.0 - direct) / reps);
    CHECK(std::fabs(est3.estimate - direct) < 3.0 * (est3.se + se_direct));
  }

  // serialization carries the estimator fields
  auto j = est3.to_json();
  CHECK(j.contains("estimate"));
  CHECK(j.contains("se"));
  CHECK(j.contains("replicas"));
  CHECK(j.contains("excluded"));
  CHECK(j.contains("seed"));
}

TEST_CASE("importance estimation is thread-count invariant", "[spine]") {
  auto law = model::cosh_family(2.0);
  auto ev = [](const brw::TreeRun& t) { return t.I.back() <= 0.0; };
  auto a = spine::importance_estimate(law, 4, ev, 4000, {}, 99, 1);
  auto b = spine::importance_estimate(law, 4, ev, 4000, {}, 99, 3);
  CHECK(a.estimate == b.estimate);
  CHECK(a.se == b.se);
}

TEST_CASE("aggregated tail importance matches the tree route", "[spine]") {
  auto law = model::cosh_family(2.0);
  auto lat = model::lattice_structure(law);
  double threshold = brw::a_n(2.0 * kC, 6, lat);
  auto tree_route = spine::importance_estimate(
      law, 6, [threshold](const brw::TreeRun& t) { return t.I.back() <= threshold + 1e-12; }, 30000, {}, 400);
  auto agg_route = spine::tail_importance_estimate(law, 6, threshold, 30000, 401);
  CHECK(std::fabs(tree_route.estimate - agg_route.estimate) < 3.0 * (tree_route.se + agg_route.se));

  // and both sit on the exact value
  double exact_p = exact::min_cdf_lattice(law, 6).prob_le(threshold + 1e-12);
  CHECK(std::fabs(agg_route.estimate - exact_p) < 3.0 * agg_route.se);

  // excluded replicas are counted, not silently dropped
  brw::SimCaps tiny;
  tiny.max_particles = 25;
  auto capped = spine::importance_estimate(
      model::cosh_family(1.2), 8, [](const brw::TreeRun&) { return true; }, 200, tiny, 402);
  CHECK(capped.excluded > 0);
  CHECK(capped.excluded < 200);
  CHECK(std::isfinite(capped.estimate));

  // a cap nothing survives is an error, not a silent zero
  brw::SimCaps impossible;
  impossible.max_particles = 2;
  CHECK_THROWS_AS(spine::importance_estimate(
                      law, 5, [](const brw::TreeRun&) { return true; }, 20, impossible, 403),
                  std::runtime_error);
}
