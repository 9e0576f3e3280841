#pragma once

// Aggregated size-biased runs for lattice laws: the spine is explicit, every
// non-spine child of a spine particle roots an independent original-measure
// subtree simulated as site counts. Only (W_n, I_n) of the full tree are
// produced, which is all the left-tail importance estimator needs, at
// O(n^2 * sites) per replica instead of O(population).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/parallel.hpp"
#include "brwx/rng.hpp"
#include "brwx/sitecount.hpp"
#include "brwx/spine.hpp"

namespace brwx::spine {

struct AggregateQRun {
  double I_n = 0.0;
  double log_W = 0.0;
  std::vector<double> spine;  // V(w_0..n)
};

// One size-biased replica started at 0 over n generations.
inline AggregateQRun simulate_spine_counts(const model::OffspringLaw& law, const SizeBiasedLaw& sb, int n,
                                           rng::Engine& eng) {
  model::LatticeInfo lat = model::lattice_structure(law);
  if (!lat.lattice) throw std::invalid_argument("simulate_spine_counts: law is not lattice");
  AggregateQRun out;
  out.spine.assign(static_cast<std::size_t>(n) + 1, 0.0);

  struct Sibling {
    int born;             // generation of the sibling (spine generation + 1)
    std::int64_t lat;     // absolute lattice coordinate at its generation
  };
  std::vector<Sibling> siblings;
  std::int64_t spine_lat = 0;
  double cur = 0.0;
  for (int g = 0; g < n; ++g) {
    SpineStep step = sample_spine_step(sb, cur, eng);
    for (std::size_t i = 0; i < step.children.size(); ++i) {
      double d = step.children[i] - cur;
      std::int64_t j = std::llround((d - lat.offset) / lat.span);
      if (i == step.spine_index) continue;
      siblings.push_back({g + 1, spine_lat + j});
    }
    double d = step.children[step.spine_index] - cur;
    spine_lat += std::llround((d - lat.offset) / lat.span);
    cur = lat.offset * static_cast<double>(g + 1) + lat.span * static_cast<double>(spine_lat);
    out.spine[static_cast<std::size_t>(g) + 1] = cur;
  }

  // fold in the subtrees: the generation-n population of a subtree born at
  // (g0, k0) sits at absolute coordinates k0 + k' for subtree coordinate k'
  double spine_n = out.spine.back();
  std::int64_t min_lat = spine_lat;
  numeric::Kahan w;
  w.add(std::exp(-spine_n));
  for (const Sibling& s : siblings) {
    int depth = n - s.born;
    brw::SiteCountRun sub = brw::simulate_counts(law, depth, eng);
    if (sub.extinct_at) continue;
    const auto& counts = sub.counts.back();
    std::int64_t kmin = sub.kmin.back();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] == 0) continue;
      std::int64_t abs_lat = s.lat + kmin + static_cast<std::int64_t>(i);
      min_lat = std::min(min_lat, abs_lat);
      double pos = lat.offset * static_cast<double>(n) + lat.span * static_cast<double>(abs_lat);
      w.add(static_cast<double>(counts[i]) * std::exp(-pos));
    }
  }
  out.I_n = lat.offset * static_cast<double>(n) + lat.span * static_cast<double>(min_lat);
  out.log_W = std::log(w.value());
  return out;
}

// P(I_n <= threshold) = E_Q[W_n^{-1} 1{I_n <= threshold}] on the aggregated
// representation; same estimator contract as importance_estimate.
inline IsResult tail_importance_estimate(const model::OffspringLaw& law, int n, double threshold,
                                         std::uint64_t replicas, std::uint64_t seed, int threads = 1) {
  SizeBiasedLaw sb = size_bias(law);
  std::vector<double> vals(replicas, 0.0);
  std::vector<char> ok(replicas, 0);
  parallel_for(replicas, threads, [&](std::uint64_t r) {
    rng::Engine eng = rng::make_engine(seed, r);
    try {
      AggregateQRun run = simulate_spine_counts(law, sb, n, eng);
      ok[r] = 1;
      if (run.I_n <= threshold + 1e-12) vals[r] = std::exp(-run.log_W);
    } catch (const std::exception&) {
    }
  });
  IsResult out;
  out.seed = seed;
  out.replicas = replicas;
  numeric::Kahan sum;
  std::uint64_t kept = 0;
  for (std::uint64_t r = 0; r < replicas; ++r)
    if (ok[r]) {
      ++kept;
      sum.add(vals[r]);
    }
  out.excluded = replicas - kept;
  if (kept == 0) throw std::runtime_error("tail_importance_estimate: no usable replicas");
  double mean = sum.value() / static_cast<double>(kept);
  numeric::Kahan var;
  for (std::uint64_t r = 0; r < replicas; ++r)
    if (ok[r]) var.add((vals[r] - mean) * (vals[r] - mean));
  out.estimate = mean;
  if (kept > 1) out.se = std::sqrt(var.value() / (static_cast<double>(kept) * static_cast<double>(kept - 1)));
  return out;
}

}  // namespace brwx::spine
