#pragma once

// Aggregated simulation of a lattice branching random walk: instead of
// individual particles, keep the exact particle count of every lattice site
// per generation, advancing with multinomial draws. The per-generation
// displacement flows F_g(site, displacement) are retained, which is enough
// to sample the ancestral path of a uniformly chosen extremal particle:
// conditioned on all counts and flows, the assignment of children to parents
// is an exchangeable wiring, independent across generations, so the backward
// site chain of a distinguished particle is Markov with kernel
//   P(parent site k', displacement d | child site k) = F_g(k', d) / count_{g+1}(k).
// This reproduces the leftmost-path law exactly (all argmin particles share
// one site, so the uniform tie-break is free) at cost O(n * sites) instead of
// O(total population) -- the only way to reach populations like 10^10.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "brwx/brw.hpp"
#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/rng.hpp"

namespace brwx::brw {

struct SiteCountRun {
  model::LatticeInfo lattice;
  int n = 0;
  std::vector<double> disp_values;        // distinct displacement values
  std::vector<std::int64_t> disp_offsets; // lattice offsets of displacements
  // per generation g: window of occupied sites [kmin[g], kmin[g]+counts[g].size())
  std::vector<std::int64_t> kmin;
  std::vector<std::vector<std::int64_t>> counts;
  // flows[g][site * D + d]: children of generation-g site taking displacement d
  std::vector<std::vector<std::int64_t>> flows;
  std::vector<double> W, I;
  std::optional<int> extinct_at;

  double position(int g, std::int64_t k) const {
    return lattice.offset * static_cast<double>(g) + lattice.span * static_cast<double>(k);
  }
  std::int64_t count_at(int g, std::int64_t k) const {
    const auto& c = counts[static_cast<std::size_t>(g)];
    std::int64_t i = k - kmin[static_cast<std::size_t>(g)];
    if (i < 0 || i >= static_cast<std::int64_t>(c.size())) return 0;
    return c[static_cast<std::size_t>(i)];
  }
  bool complete() const { return !extinct_at && static_cast<int>(counts.size()) == n + 1; }
};

namespace detail {

inline std::int64_t binomial_draw(rng::Engine& eng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> d(n, p);
  return d(eng);
}

// multinomial via sequential conditional binomials
inline void multinomial_draw(rng::Engine& eng, std::int64_t n, std::span<const double> probs,
                             std::vector<std::int64_t>& out) {
  out.assign(probs.size(), 0);
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < probs.size() && n > 0; ++i) {
    double p = rest > 0.0 ? probs[i] / rest : 1.0;
    std::int64_t k = binomial_draw(eng, n, std::min(1.0, p));
    out[i] = k;
    n -= k;
    rest -= probs[i];
  }
  if (!probs.empty()) out[probs.size() - 1] = n;
}

}  // namespace detail

// Exact-in-distribution aggregated run. Requires a lattice law; throws on
// count overflow (populations must stay below ~4.6e18).
inline SiteCountRun simulate_counts(const model::OffspringLaw& law, int n, rng::Engine& eng) {
  if (n < 0) throw std::invalid_argument("simulate_counts: n < 0");
  SiteCountRun run;
  run.lattice = model::lattice_structure(law);
  if (!run.lattice.lattice) throw std::invalid_argument("simulate_counts: law is not lattice");
  run.n = n;

  const bool product = law.form() == model::OffspringLaw::Form::product;
  // displacement table
  for (double d : law.displacement_support()) {
    std::int64_t j = std::llround((d - run.lattice.offset) / run.lattice.span);
    if (std::fabs(d - (run.lattice.offset + run.lattice.span * static_cast<double>(j))) > 1e-9)
      throw std::invalid_argument("simulate_counts: displacement off the lattice");
    run.disp_values.push_back(d);
    run.disp_offsets.push_back(j);
  }
  const std::size_t D = run.disp_values.size();
  // per-atom child multiplicities over the displacement table (explicit form)
  std::vector<std::vector<std::int64_t>> atom_mult;
  std::vector<double> atom_probs, disp_probs;
  if (product) {
    disp_probs.assign(D, 0.0);
    const auto& dd = law.displacement_dist();
    for (std::size_t i = 0; i < dd.values.size(); ++i)
      for (std::size_t d = 0; d < D; ++d)
        if (run.disp_values[d] == dd.values[i]) disp_probs[d] += dd.probs[i];
  } else {
    for (const auto& a : law.atoms()) {
      atom_probs.push_back(a.prob);
      std::vector<std::int64_t> mult(D, 0);
      for (double x : a.children)
        for (std::size_t d = 0; d < D; ++d)
          if (run.disp_values[d] == x) ++mult[d];
      atom_mult.push_back(std::move(mult));
    }
  }

  run.kmin.push_back(0);
  run.counts.push_back({1});
  run.W.push_back(1.0);
  run.I.push_back(0.0);

  constexpr std::int64_t kCountGuard = std::int64_t{4} << 60;
  std::vector<std::int64_t> scratch;
  for (int g = 0; g < n; ++g) {
    const auto& cur = run.counts[static_cast<std::size_t>(g)];
    std::int64_t cur_kmin = run.kmin[static_cast<std::size_t>(g)];
    std::int64_t jlo = run.disp_offsets.empty() ? 0 : run.disp_offsets.front();
    std::int64_t jhi = run.disp_offsets.empty() ? 0 : run.disp_offsets.back();
    for (std::int64_t j : run.disp_offsets) {
      jlo = std::min(jlo, j);
      jhi = std::max(jhi, j);
    }
    std::int64_t next_kmin = cur_kmin + jlo;
    std::size_t next_size = cur.size() + static_cast<std::size_t>(jhi - jlo);
    std::vector<std::int64_t> next(next_size, 0);
    std::vector<std::int64_t> flow(cur.size() * D, 0);

    std::int64_t gen_total = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      std::int64_t pop = cur[i];
      if (pop == 0) continue;
      gen_total += pop;
      if (pop > kCountGuard / std::max(1, law.max_count()) || gen_total > kCountGuard / std::max(1, law.max_count()))
        throw std::overflow_error("simulate_counts: population exceeds exact integer range");
      if (product) {
        const auto& cd = law.count_dist();
        detail::multinomial_draw(eng, pop, cd.probs, scratch);
        std::int64_t total = 0;
        for (std::size_t ci = 0; ci < scratch.size(); ++ci) total += scratch[ci] * cd.values[ci];
        detail::multinomial_draw(eng, total, disp_probs, scratch);
        for (std::size_t d = 0; d < D; ++d) flow[i * D + d] = scratch[d];
      } else {
        detail::multinomial_draw(eng, pop, atom_probs, scratch);
        for (std::size_t ai = 0; ai < scratch.size(); ++ai)
          if (scratch[ai] > 0)
            for (std::size_t d = 0; d < D; ++d) flow[i * D + d] += scratch[ai] * atom_mult[ai][d];
      }
      std::int64_t k = cur_kmin + static_cast<std::int64_t>(i);
      for (std::size_t d = 0; d < D; ++d)
        next[static_cast<std::size_t>(k + run.disp_offsets[d] - next_kmin)] += flow[i * D + d];
    }
    run.flows.push_back(std::move(flow));

    // trim the window to occupied sites
    std::size_t lo = 0, hi = next.size();
    while (lo < hi && next[lo] == 0) ++lo;
    while (hi > lo && next[hi - 1] == 0) --hi;
    if (lo == hi) {
      run.extinct_at = g + 1;
      return run;
    }
    std::vector<std::int64_t> trimmed(next.begin() + static_cast<std::ptrdiff_t>(lo),
                                      next.begin() + static_cast<std::ptrdiff_t>(hi));
    run.kmin.push_back(next_kmin + static_cast<std::int64_t>(lo));
    run.counts.push_back(std::move(trimmed));

    numeric::Kahan w;
    const auto& nc = run.counts.back();
    std::int64_t nk = run.kmin.back();
    for (std::size_t i = 0; i < nc.size(); ++i)
      if (nc[i] > 0)
        w.add(static_cast<double>(nc[i]) * std::exp(-run.position(g + 1, nk + static_cast<std::int64_t>(i))));
    run.W.push_back(w.value());
    run.I.push_back(run.position(g + 1, nk));  // window is trimmed, first site is the minimum
  }
  return run;
}

// Ancestral path of a uniformly chosen leftmost particle, sampled backward
// through the stored flows. Consumes the engine only after the forward pass.
inline MinPath backward_leftmost_path(const SiteCountRun& run, rng::Engine& eng) {
  if (!run.complete()) throw std::invalid_argument("backward_leftmost_path: run extinct or incomplete");
  const std::size_t D = run.disp_values.size();
  MinPath path;
  path.values.assign(static_cast<std::size_t>(run.n) + 1, 0.0);
  std::int64_t k = run.kmin[static_cast<std::size_t>(run.n)];  // leftmost occupied site
  path.argmin_count = static_cast<std::uint64_t>(run.count_at(run.n, k));
  path.chosen_index = static_cast<std::uint64_t>(
      std::min(rng::uniform01(eng) * static_cast<double>(path.argmin_count),
               static_cast<double>(path.argmin_count - 1)));
  path.values[static_cast<std::size_t>(run.n)] = run.position(run.n, k);
  for (int g = run.n; g > 0; --g) {
    const auto& flow = run.flows[static_cast<std::size_t>(g - 1)];
    std::int64_t pk = run.kmin[static_cast<std::size_t>(g - 1)];
    std::size_t sites = run.counts[static_cast<std::size_t>(g - 1)].size();
    double total = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      std::int64_t kp = k - run.disp_offsets[d];
      std::int64_t i = kp - pk;
      if (i >= 0 && i < static_cast<std::int64_t>(sites))
        total += static_cast<double>(flow[static_cast<std::size_t>(i) * D + d]);
    }
    double u = rng::uniform01(eng) * total;
    std::int64_t chosen_kp = k;
    for (std::size_t d = 0; d < D; ++d) {
      std::int64_t kp = k - run.disp_offsets[d];
      std::int64_t i = kp - pk;
      if (i < 0 || i >= static_cast<std::int64_t>(sites)) continue;
      double w = static_cast<double>(flow[static_cast<std::size_t>(i) * D + d]);
      chosen_kp = kp;
      if (u < w) break;
      u -= w;
    }
    k = chosen_kp;
    path.values[static_cast<std::size_t>(g - 1)] = run.position(g - 1, k);
  }
  return path;
}

}  // namespace brwx::brw
