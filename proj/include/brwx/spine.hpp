#pragma once

// Spinal decomposition sampler. Under the size-biased measure the tree
// carries one distinguished ray: the spine particle reproduces through the
// reweighted point process (density sum_children e^{-x} against the original
// law) and its successor is chosen among its children proportionally to
// e^{-position}; all other particles reproduce as under the original
// measure. Over the first n generations the density of the size-biased
// measure started at a relative to the original one is e^{a} W_n, so
// materialized runs double as importance samples: P(A) = E_Q[W_n^{-1} 1_A].

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "brwx/brw.hpp"
#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/parallel.hpp"
#include "brwx/rng.hpp"

namespace brwx::spine {

struct SizeBiasedLaw {
  std::vector<model::Atom> atoms;  // prob = source prob * sum_children e^{-x}
  model::OffspringLaw source;
  std::vector<double> atom_probs;  // cached for categorical draws
};

// Exact reweighting of the offspring atoms. Valid for boundary laws, where
// the weights integrate to one; residual normalization error within tol is
// renormalized away.
inline SizeBiasedLaw size_bias(const model::OffspringLaw& law, double tol = 1e-10) {
  if (std::fabs(law.log_laplace(1.0)) > tol)
    throw std::invalid_argument("size_bias: law is not boundary-normalized");
  SizeBiasedLaw sb{{}, law, {}};
  double total = 0.0;
  law.for_each_atom([&](double p, std::span<const double> ch) {
    double w = 0.0;
    for (double x : ch) w += std::exp(-x);
    double q = p * w;
    if (q > 0.0) {
      sb.atoms.push_back(model::Atom{q, std::vector<double>(ch.begin(), ch.end())});
      total += q;
    }
  });
  for (auto& a : sb.atoms) {
    a.prob /= total;
    sb.atom_probs.push_back(a.prob);
  }
  return sb;
}

struct SpineStep {
  std::vector<double> children;  // absolute positions of the spine particle's children
  std::size_t spine_index = 0;
};

inline SpineStep sample_spine_step(const SizeBiasedLaw& sb, double current, rng::Engine& eng) {
  const model::Atom& atom = sb.atoms[rng::categorical(eng, sb.atom_probs)];
  SpineStep step;
  step.children.reserve(atom.children.size());
  double total = 0.0;
  for (double d : atom.children) {
    step.children.push_back(current + d);
    total += std::exp(-d);  // e^{-V(child)} up to the common factor e^{-current}
  }
  double u = rng::uniform01(eng) * total;
  for (std::size_t i = 0; i < atom.children.size(); ++i) {
    double w = std::exp(-atom.children[i]);
    step.spine_index = i;
    if (u < w) break;
    u -= w;
  }
  return step;
}

struct SpineRun {
  double start = 0.0;
  std::vector<double> positions;  // V(w_0), ..., V(w_n)
  std::vector<SpineStep> steps;
  std::optional<brw::TreeRun> tree;              // full size-biased tree when materialized
  std::vector<std::uint32_t> spine_node;         // index of w_g within tree.gens[g]
  double log_W = 0.0;                            // ln W_n of the materialized tree
  bool cap_hit = false;
};

namespace detail {

inline double log_W_of(const brw::TreeRun& run) {
  const auto& last = run.gens.back();
  std::vector<double> neg(last.pos.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -last.pos[i];
  return numeric::log_sum_exp(neg);
}

}  // namespace detail

// Spine of length n started at `a`. With materialize, the non-spine children
// grow independent original-measure subtrees, producing the full size-biased
// tree and its W_n.
inline SpineRun simulate_spine(const model::OffspringLaw& law, int n, double a, rng::Engine& eng,
                               bool materialize = false, const brw::SimCaps& caps = {}) {
  if (n < 0) throw std::invalid_argument("simulate_spine: n < 0");
  SizeBiasedLaw sb = size_bias(law);
  SpineRun run;
  run.start = a;
  run.positions.push_back(a);
  if (!materialize) {
    double cur = a;
    for (int g = 0; g < n; ++g) {
      SpineStep step = sample_spine_step(sb, cur, eng);
      cur = step.children[step.spine_index];
      run.positions.push_back(cur);
      run.steps.push_back(std::move(step));
    }
    return run;
  }

  brw::TreeRun tree;
  tree.lattice = model::lattice_structure(law);
  tree.target_n = n;
  auto ls = brw::detail::LatticeSteps::build(law, tree.lattice);
  bool lattice_ok = ls.active && a == 0.0;  // lattice frame anchored at the root
  if (!lattice_ok) tree.lattice.lattice = false;

  brw::Generation root;
  root.pos = {a};
  root.parent = {0};
  if (lattice_ok) root.lat = {0};
  tree.gens.push_back(std::move(root));
  tree.particles = 1;
  tree.W.push_back(std::exp(-a));
  tree.I.push_back(a);
  run.spine_node.push_back(0);

  std::vector<double> children;
  for (int g = 0; g < n; ++g) {
    const brw::Generation& cur = tree.gens.back();
    std::uint32_t spine_at = run.spine_node.back();
    brw::Generation next;
    numeric::Kahan w;
    std::uint32_t next_spine = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      std::size_t base = next.size();
      if (i == spine_at) {
        SpineStep step = sample_spine_step(sb, cur.pos[i], eng);
        next_spine = static_cast<std::uint32_t>(base + step.spine_index);
        children.clear();
        for (double c : step.children) children.push_back(c - cur.pos[i]);
        run.positions.push_back(step.children[step.spine_index]);
        run.steps.push_back(std::move(step));
      } else {
        law.sample_into(eng, children);
      }
      if (tree.particles + children.size() > caps.max_particles ||
          next.size() + children.size() > std::numeric_limits<std::uint32_t>::max()) {
        run.cap_hit = true;
        tree.cap_hit = true;
        run.tree = std::move(tree);
        return run;
      }
      for (double d : children) {
        double p = cur.pos[i] + d;
        if (lattice_ok) {
          std::int64_t k = cur.lat[i] + ls.offset_of(d);
          next.lat.push_back(k);
          p = ls.alpha * static_cast<double>(g + 1) + ls.beta * static_cast<double>(k);
        }
        next.pos.push_back(p);
        next.parent.push_back(static_cast<std::uint32_t>(i));
        w.add(std::exp(-p));
      }
      tree.particles += children.size();
    }
    double mn = next.pos[0];
    for (double p : next.pos) mn = std::min(mn, p);
    tree.gens.push_back(std::move(next));
    tree.W.push_back(w.value());
    tree.I.push_back(mn);
    run.spine_node.push_back(next_spine);
  }
  run.log_W = detail::log_W_of(tree);
  run.tree = std::move(tree);
  return run;
}

using TreeEvent = std::function<bool(const brw::TreeRun&)>;

struct IsResult {
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t replicas = 0;
  std::uint64_t excluded = 0;  // cap-hit replicas, excluded from the mean
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    return {{"estimate", estimate}, {"se", se}, {"replicas", replicas}, {"excluded", excluded}, {"seed", seed}};
  }
};

// P(A) = E_Q[W_n^{-1} 1_A] over independent size-biased replicas. Weights are
// handled in log space; the standard error is the jackknife estimate for the
// sample mean (which reduces to s/sqrt(R)).
inline IsResult importance_estimate(const model::OffspringLaw& law, int n, const TreeEvent& event,
                                    std::uint64_t replicas, const brw::SimCaps& caps, std::uint64_t seed,
                                    int threads = 1) {
  std::vector<double> vals(replicas, 0.0);
  std::vector<char> ok(replicas, 0);
  parallel_for(replicas, threads, [&](std::uint64_t r) {
    rng::Engine eng = rng::make_engine(seed, r);
    SpineRun run = simulate_spine(law, n, 0.0, eng, /*materialize=*/true, caps);
    if (run.cap_hit) return;
    ok[r] = 1;
    if (event(*run.tree)) vals[r] = std::exp(-run.log_W);
  });
  IsResult out;
  out.seed = seed;
  out.replicas = replicas;
  numeric::Kahan sum;
  std::uint64_t kept = 0;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    if (!ok[r]) continue;
    ++kept;
    sum.add(vals[r]);
  }
  out.excluded = replicas - kept;
  if (kept == 0) throw std::runtime_error("importance_estimate: all replicas hit the cap");
  double mean = sum.value() / static_cast<double>(kept);
  numeric::Kahan var;
  for (std::uint64_t r = 0; r < replicas; ++r)
    if (ok[r]) var.add((vals[r] - mean) * (vals[r] - mean));
  out.estimate = mean;
  if (kept > 1)
    out.se = std::sqrt(var.value() / (static_cast<double>(kept) * static_cast<double>(kept - 1)));
  return out;
}

}  // namespace brwx::spine
