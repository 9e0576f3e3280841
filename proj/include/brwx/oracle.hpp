#pragma once

// The exact-identity table: every finite identity the enumeration module can
// check, over a list of fixture laws, with one row per check. The injected
// bug mode negates one size-biased weight, which must trip the reweighting
// checks -- a sentinel that the harness actually detects failures.

#include <cmath>
#include <string>
#include <vector>

#include "brwx/exact.hpp"
#include "brwx/model.hpp"
#include "brwx/rwalk.hpp"
#include "brwx/spine.hpp"

namespace brwx::oracle {

struct Check {
  std::string fixture;
  std::string name;
  double value = 0.0;  // deviation measure; pass iff value <= tol
  double tol = 0.0;
  bool pass = false;
};

struct Report {
  std::vector<Check> checks;
  bool all_pass = true;

  void add(const std::string& fixture, const std::string& name, double value, double tol) {
    bool ok = std::isfinite(value) && value <= tol;
    checks.push_back({fixture, name, value, tol, ok});
    all_pass = all_pass && ok;
  }
};

inline void run_fixture(Report& rep, const std::string& name, const model::OffspringLaw& law,
                        bool inject_bug = false) {
  using exact::enumerate_tree;

  // enumeration mass and martingale mean
  for (int n = 1; n <= 3; ++n) {
    auto atoms = enumerate_tree(law, n);
    rep.add(name, "mass_n" + std::to_string(n), std::fabs(exact::total_probability(atoms) - 1.0), 1e-12);
    rep.add(name, "mean_W_n" + std::to_string(n), std::fabs(exact::mean_W(atoms) - 1.0), 1e-12);
  }

  // many-to-one over an indicator basis: every step-law path of length n,
  // plus the aggregate functionals
  rwalk::StepLaw step = rwalk::step_law(law);
  for (int n = 1; n <= 3; ++n) {
    double worst = 0.0;
    std::vector<std::vector<double>> paths;
    std::vector<double> cur(static_cast<std::size_t>(n));
    std::function<void(int, double)> build = [&](int k, double s) {
      if (k == n) {
        paths.push_back(cur);
        return;
      }
      for (double v : step.values) {
        cur[static_cast<std::size_t>(k)] = s + v;
        build(k + 1, s + v);
      }
    };
    build(0, 0.0);
    for (const auto& target : paths) {
      auto g = [&target](const std::vector<double>& p) {
        for (std::size_t i = 0; i < p.size(); ++i)
          if (std::fabs(p[i] - target[i]) > 1e-12) return 0.0;
        return 1.0;
      };
      auto mo = exact::exact_many_to_one(law, n, g);
      worst = std::max(worst, std::fabs(mo.lhs - mo.rhs));
    }
    auto mo1 = exact::exact_many_to_one(law, n, [](const std::vector<double>&) { return 1.0; });
    worst = std::max(worst, std::fabs(mo1.lhs - mo1.rhs));
    auto mo2 = exact::exact_many_to_one(law, n, [](const std::vector<double>& p) {
      double mn = 0.0;
      for (double v : p) mn = std::min(mn, v);
      return mn >= 0.0 ? 1.0 : 0.0;
    });
    worst = std::max(worst, std::fabs(mo2.lhs - mo2.rhs));
    rep.add(name, "many_to_one_n" + std::to_string(n), worst, 1e-10);
  }

  // size-biased law over (tree, spine): mass, reweighting, posterior, and
  // agreement with the independently enumerated spinal construction
  {
    int n = 2;
    exact::QLaw q = exact::exact_q_law(law, n);
    if (inject_bug && !q.atoms.empty()) q.atoms[0].prob = -q.atoms[0].prob;
    rep.add(name, "q_mass", std::fabs(q.total() - 1.0), 1e-12);
    double worst_rw = 0.0, worst_post = 0.0;
    for (std::size_t t = 0; t < q.trees.size(); ++t) {
      double qt = q.tree_marginal(t);
      double wn = q.trees[t].W_n();
      worst_rw = std::max(worst_rw, std::fabs(qt - wn * q.trees[t].prob));
      for (const auto& a : q.atoms) {
        if (a.tree != t) continue;
        double posterior = a.prob / qt;
        double expected = std::exp(-q.trees[t].pos.back()[a.leaf]) / wn;
        worst_post = std::max(worst_post, std::fabs(posterior - expected));
      }
    }
    rep.add(name, "q_reweighting", worst_rw, 1e-12);
    rep.add(name, "spine_posterior", worst_post, 1e-12);
    rep.add(name, "spinal_construction_tv",
            exact::total_variation(exact::q_law_as_map(q), exact::enumerate_spinal_process(law, n)), 1e-12);
  }

  // spine one-step marginal equals the step law
  {
    spine::SizeBiasedLaw sb = spine::size_bias(law);
    std::map<double, double> marg;
    for (const auto& a : sb.atoms) {
      double w = 0.0;
      for (double d : a.children) w += std::exp(-d);
      for (double d : a.children) marg[d] += a.prob * std::exp(-d) / w;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < step.values.size(); ++i) {
      double m = marg.count(step.values[i]) ? marg[step.values[i]] : 0.0;
      tv += std::fabs(m - step.probs[i]);
    }
    rep.add(name, "spine_marginal_tv", tv / 2.0, 1e-12);
  }

  // minimum law: enumeration against the lattice recursion
  if (model::lattice_structure(law).lattice) {
    int n = 3;
    auto dist = exact::exact_min_cdf(law, n);
    auto rec = exact::min_cdf_lattice(law, n);
    double cum = 0.0, worst = 0.0;
    for (const auto& [x, p] : dist) {
      cum += p;
      worst = std::max(worst, std::fabs(cum - rec.prob_le(x)));
    }
    rep.add(name, "min_cdf_recursion", worst, 1e-10);
  }
}

inline Report run_all(const std::vector<std::pair<std::string, model::OffspringLaw>>& fixtures,
                      bool inject_bug = false) {
  Report rep;
  for (const auto& [name, law] : fixtures) run_fixture(rep, name, law, inject_bug);
  return rep;
}

}  // namespace brwx::oracle
