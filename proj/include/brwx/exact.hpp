#pragma once

// Exhaustive enumeration oracles over tiny trees: every depth-n realization
// of a finite-support law with its exact probability. Ground truth for the
// finite identities (many-to-one, martingale mean, size-biased reweighting,
// spine posterior) at n <= 3. Probabilities are accumulated in log space and
// summed pairwise. A separate lattice recursion gives the exact law of the
// generation minimum at depths far beyond enumeration range.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/rwalk.hpp"

namespace brwx::exact {

struct TreeAtom {
  std::vector<std::vector<double>> pos;              // positions per generation, pos[0] = {0}
  std::vector<std::vector<std::uint32_t>> parent;    // parent indices per generation
  std::vector<std::vector<std::size_t>> atom_choice; // offspring atom index per node, generations 0..n-1
  double log_prob = 0.0;
  double prob = 0.0;

  // ancestral positions V(u_1), ..., V(u_n) of leaf `leaf`
  std::vector<double> leaf_path(std::size_t leaf) const {
    int n = static_cast<int>(pos.size()) - 1;
    std::vector<double> path(static_cast<std::size_t>(n));
    std::size_t idx = leaf;
    for (int g = n; g >= 1; --g) {
      path[static_cast<std::size_t>(g - 1)] = pos[static_cast<std::size_t>(g)][idx];
      idx = parent[static_cast<std::size_t>(g)][idx];
    }
    return path;
  }
  double W_n() const {
    numeric::Kahan k;
    for (double p : pos.back()) k.add(std::exp(-p));
    return k.value();
  }
};

namespace detail {

struct Enumerator {
  std::vector<model::Atom> atoms;
  std::vector<double> log_probs;
  int n;
  std::uint64_t max_atoms;
  std::uint64_t emitted = 0;
  std::function<void(const TreeAtom&)> sink;
  TreeAtom work;

  void run() {
    work.pos.assign(1, {0.0});
    work.parent.assign(1, {0});
    work.atom_choice.clear();
    work.log_prob = 0.0;
    log_probs.clear();
    for (const auto& a : atoms) log_probs.push_back(a.prob > 0.0 ? std::log(a.prob) : 0.0);
    // recursion descends while outer frames hold references into these
    work.pos.reserve(static_cast<std::size_t>(n) + 2);
    work.parent.reserve(static_cast<std::size_t>(n) + 2);
    work.atom_choice.reserve(static_cast<std::size_t>(n) + 2);
    generation(0);
  }

  void generation(int g) {
    if (g == n) {
      if (++emitted > max_atoms) throw std::overflow_error("enumerate_tree: atom bound exceeded");
      work.prob = std::exp(work.log_prob);
      sink(work);
      return;
    }
    work.atom_choice.push_back({});
    work.pos.push_back({});
    work.parent.push_back({});
    node(g, 0);
    work.atom_choice.pop_back();
    work.pos.pop_back();
    work.parent.pop_back();
  }

  void node(int g, std::size_t i) {
    auto& cur = work.pos[static_cast<std::size_t>(g)];
    if (i == cur.size()) {
      generation(g + 1);
      return;
    }
    auto& nxt = work.pos[static_cast<std::size_t>(g) + 1];
    auto& par = work.parent[static_cast<std::size_t>(g) + 1];
    auto& chc = work.atom_choice[static_cast<std::size_t>(g)];
    for (std::size_t ai = 0; ai < atoms.size(); ++ai) {
      const model::Atom& a = atoms[ai];
      if (a.prob <= 0.0) continue;
      std::size_t base = nxt.size();
      for (double d : a.children) {
        nxt.push_back(cur[i] + d);
        par.push_back(static_cast<std::uint32_t>(i));
      }
      chc.push_back(ai);
      double saved = work.log_prob;  // restore by copy, += / -= pairs drift
      work.log_prob = saved + log_probs[ai];
      node(g, i + 1);
      work.log_prob = saved;
      chc.pop_back();
      nxt.resize(base);
      par.resize(base);
    }
  }
};

}  // namespace detail

inline std::vector<TreeAtom> enumerate_tree(const model::OffspringLaw& law, int n,
                                            std::uint64_t max_atoms = 10'000'000) {
  if (n < 0) throw std::invalid_argument("enumerate_tree: n < 0");
  detail::Enumerator e;
  e.atoms = law.expanded().atoms();
  e.n = n;
  e.max_atoms = max_atoms;
  std::vector<TreeAtom> out;
  e.sink = [&](const TreeAtom& t) { out.push_back(t); };
  e.run();
  return out;
}

inline double total_probability(const std::vector<TreeAtom>& atoms) {
  std::vector<double> ps;
  ps.reserve(atoms.size());
  for (const auto& t : atoms) ps.push_back(t.prob);
  return numeric::pairwise_sum(ps);
}

inline double mean_W(const std::vector<TreeAtom>& atoms) {
  std::vector<double> ps;
  ps.reserve(atoms.size());
  for (const auto& t : atoms) ps.push_back(t.prob * t.W_n());
  return numeric::pairwise_sum(ps);
}

using PathFunctional = std::function<double(const std::vector<double>&)>;

struct ManyToOne {
  double lhs = 0.0;  // E[ sum_{|u|=n} g(V(u_1), ..., V(u_n)) ] by tree enumeration
  double rhs = 0.0;  // E[ e^{S_n} g(S_1, ..., S_n) ] by step-law path enumeration
};

inline ManyToOne exact_many_to_one(const model::OffspringLaw& law, int n, const PathFunctional& g,
                                   std::uint64_t max_atoms = 10'000'000) {
  ManyToOne out;
  std::vector<double> terms;
  for (const auto& t : enumerate_tree(law, n, max_atoms)) {
    double s = 0.0;
    for (std::size_t leaf = 0; leaf < t.pos.back().size(); ++leaf) s += g(t.leaf_path(leaf));
    terms.push_back(t.prob * s);
  }
  out.lhs = numeric::pairwise_sum(terms);

  rwalk::StepLaw step = rwalk::step_law(law);
  std::vector<double> path(static_cast<std::size_t>(n));
  std::vector<double> rhs_terms;
  std::function<void(int, double, double)> rec = [&](int k, double s, double logp) {
    if (k == n) {
      rhs_terms.push_back(std::exp(logp) * std::exp(s) * g(path));
      return;
    }
    for (std::size_t i = 0; i < step.values.size(); ++i) {
      path[static_cast<std::size_t>(k)] = s + step.values[i];
      rec(k + 1, s + step.values[i], logp + std::log(step.probs[i]));
    }
  };
  rec(0, 0.0, 0.0);
  out.rhs = numeric::pairwise_sum(rhs_terms);
  return out;
}

// Size-biased law over (tree, spine leaf) pairs: Q(t, u) = P(t) e^{-V(u)}.
struct QAtom {
  std::size_t tree = 0;
  std::size_t leaf = 0;
  double prob = 0.0;
};

struct QLaw {
  std::vector<TreeAtom> trees;
  std::vector<QAtom> atoms;

  double total() const {
    std::vector<double> ps;
    ps.reserve(atoms.size());
    for (const auto& a : atoms) ps.push_back(a.prob);
    return numeric::pairwise_sum(ps);
  }
  double tree_marginal(std::size_t t) const {
    double s = 0.0;
    for (const auto& a : atoms)
      if (a.tree == t) s += a.prob;
    return s;
  }
};

inline QLaw exact_q_law(const model::OffspringLaw& law, int n, std::uint64_t max_atoms = 10'000'000) {
  QLaw q;
  q.trees = enumerate_tree(law, n, max_atoms);
  for (std::size_t ti = 0; ti < q.trees.size(); ++ti) {
    const TreeAtom& t = q.trees[ti];
    for (std::size_t leaf = 0; leaf < t.pos.back().size(); ++leaf)
      q.atoms.push_back({ti, leaf, t.prob * std::exp(-t.pos.back()[leaf])});
  }
  return q;
}

// canonical key of a (tree, spine) pair: atom indices in (generation, node)
// order followed by the spine leaf index
using SpineKey = std::vector<std::size_t>;

inline SpineKey q_atom_key(const QLaw& q, const QAtom& a) {
  SpineKey key;
  const TreeAtom& t = q.trees[a.tree];
  for (const auto& gen : t.atom_choice)
    for (std::size_t c : gen) key.push_back(c);
  key.push_back(a.leaf);
  return key;
}

inline std::map<SpineKey, double> q_law_as_map(const QLaw& q) {
  std::map<SpineKey, double> m;
  for (const auto& a : q.atoms) m[q_atom_key(q, a)] += a.prob;
  return m;
}

// Independent enumeration of the spinal construction itself: the spine node
// draws a size-biased atom and hands the spine to a child proportionally to
// e^{-position}; all other nodes draw original atoms. Returns the law over
// the same canonical keys.
inline std::map<SpineKey, double> enumerate_spinal_process(const model::OffspringLaw& law, int n) {
  std::vector<model::Atom> atoms = law.expanded().atoms();
  std::vector<double> weights(atoms.size(), 0.0);  // sum e^{-d} per atom
  double norm = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    for (double d : atoms[i].children) weights[i] += std::exp(-d);
    norm += atoms[i].prob * weights[i];
  }
  std::map<SpineKey, double> out;
  std::function<void(int, std::vector<double>&, std::size_t, SpineKey&, double)> gen_rec =
      [&](int g, std::vector<double>& cur, std::size_t spine_at, SpineKey& key, double prob) {
        if (g == n) {
          SpineKey full = key;
          full.push_back(spine_at);
          out[full] += prob;
          return;
        }
        // assign atoms to all nodes of this generation, then recurse
        std::vector<double> next;
        std::function<void(std::size_t, std::size_t, double)> node_rec = [&](std::size_t i, std::size_t next_spine,
                                                                             double p) {
          if (i == cur.size()) {
            gen_rec(g + 1, next, next_spine, key, p);
            return;
          }
          for (std::size_t ai = 0; ai < atoms.size(); ++ai) {
            const model::Atom& a = atoms[ai];
            if (a.prob <= 0.0) continue;
            std::size_t base = next.size();
            for (double d : a.children) next.push_back(cur[i] + d);
            key.push_back(ai);
            if (i == spine_at) {
              if (weights[ai] > 0.0) {
                double atom_p = a.prob * weights[ai] / norm;  // size-biased atom draw
                for (std::size_t c = 0; c < a.children.size(); ++c) {
                  double choice = std::exp(-a.children[c]) / weights[ai];
                  node_rec(i + 1, base + c, p * atom_p * choice);
                }
              }
            } else {
              node_rec(i + 1, next_spine, p * a.prob);
            }
            key.pop_back();
            next.resize(base);
          }
        };
        node_rec(0, 0, prob);
      };
  std::vector<double> root{0.0};
  SpineKey key;
  gen_rec(0, root, 0, key, 1.0);
  return out;
}

inline double total_variation(const std::map<SpineKey, double>& a, const std::map<SpineKey, double>& b) {
  double tv = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      tv += std::fabs(ia->second);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      tv += std::fabs(ib->second);
      ++ib;
    } else {
      tv += std::fabs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return tv / 2.0;
}

// exact distribution of the generation-n minimum (optionally of the killed
// minimum: only leaves whose whole ancestry stayed >= 0 count; then the
// distribution is sub-probability)
inline std::map<double, double> exact_min_cdf(const model::OffspringLaw& law, int n, bool killed = false,
                                              std::uint64_t max_atoms = 10'000'000) {
  std::map<double, double> dist;
  constexpr double tol = 1e-12;
  for (const auto& t : enumerate_tree(law, n, max_atoms)) {
    bool found = false;
    double mn = 0.0;
    for (std::size_t leaf = 0; leaf < t.pos.back().size(); ++leaf) {
      double v = t.pos.back()[leaf];
      if (killed) {
        bool alive = v >= -tol;
        std::size_t idx = leaf;
        for (int g = n; alive && g >= 1; --g) {
          alive = t.pos[static_cast<std::size_t>(g)][idx] >= -tol;
          idx = t.parent[static_cast<std::size_t>(g)][idx];
        }
        if (!alive) continue;
      }
      if (!found || v < mn) mn = v;
      found = true;
    }
    if (found) dist[mn] += t.prob;
  }
  return dist;
}

// Exact law of the generation-n minimum on the lattice via the branching
// survival recursion G_{g+1}(k) = E[ prod_children G_g(k - j_child) ],
// where G_g(k) = P(I_g > alpha g + beta k). Linear in n, so usable at
// depths where enumeration is hopeless. Extinct trees have I = +infinity.
struct LatticeMinCdf {
  model::LatticeInfo lattice;
  int n = 0;
  std::int64_t kmin = 0;             // survival[i] = G_n(kmin + i)
  std::vector<double> survival;
  double extinct_mass = 0.0;         // P(no generation-n particles)

  double prob_le(double x) const {
    double base = lattice.offset * static_cast<double>(n);
    auto k = static_cast<std::int64_t>(std::floor((x - base) / lattice.span + 1e-9));
    if (k < kmin) return 0.0;
    std::int64_t i = k - kmin;
    if (i >= static_cast<std::int64_t>(survival.size())) return 1.0 - extinct_mass;
    return 1.0 - survival[static_cast<std::size_t>(i)];
  }
};

inline LatticeMinCdf min_cdf_lattice(const model::OffspringLaw& law, int n) {
  LatticeMinCdf out;
  out.lattice = model::lattice_structure(law);
  if (!out.lattice.lattice) throw std::invalid_argument("min_cdf_lattice: law is not lattice");
  out.n = n;
  std::vector<model::Atom> atoms = law.expanded().atoms();
  std::vector<std::vector<std::int64_t>> offs(atoms.size());
  std::int64_t jlo = 0, jhi = 0;
  for (std::size_t ai = 0; ai < atoms.size(); ++ai)
    for (double d : atoms[ai].children) {
      std::int64_t j = std::llround((d - out.lattice.offset) / out.lattice.span);
      offs[ai].push_back(j);
      jlo = std::min(jlo, j);
      jhi = std::max(jhi, j);
    }
  std::int64_t lo = n * jlo - 1, hi = n * jhi + 1;
  std::size_t width = static_cast<std::size_t>(hi - lo + 1);
  std::vector<double> G(width), Gn(width);
  double q = 0.0;  // extinction probability by the current generation
  for (std::size_t i = 0; i < width; ++i) G[i] = (lo + static_cast<std::int64_t>(i) < 0) ? 1.0 : 0.0;
  auto value = [&](const std::vector<double>& v, std::int64_t k, double qcur) {
    if (k < lo) return 1.0;
    if (k > hi) return qcur;
    return v[static_cast<std::size_t>(k - lo)];
  };
  for (int g = 0; g < n; ++g) {
    // extinction pgf step: q' = sum_a p_a q^{|a|}
    double qn = 0.0;
    for (std::size_t ai = 0; ai < atoms.size(); ++ai)
      qn += atoms[ai].prob * std::pow(q, static_cast<double>(offs[ai].size()));
    for (std::int64_t k = lo; k <= hi; ++k) {
      double s = 0.0;
      for (std::size_t ai = 0; ai < atoms.size(); ++ai) {
        double t = atoms[ai].prob;
        for (std::int64_t j : offs[ai]) t *= value(G, k - j, q);
        s += t;
      }
      Gn[static_cast<std::size_t>(k - lo)] = s;
    }
    G.swap(Gn);
    q = qn;
  }
  out.kmin = lo;
  out.survival = std::move(G);
  out.extinct_mass = q;
  return out;
}

}  // namespace brwx::exact
