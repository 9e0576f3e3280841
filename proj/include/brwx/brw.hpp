#pragma once

// Forward simulation of the branching random walk under the original measure:
// full-genealogy tree runs, leftmost-path extraction, additive-martingale and
// minimum series, killed minimum, first-crossing stopping lines, and the
// level sequence a_n(z). In lattice mode positions are stored as integer
// lattice coordinates (position = alpha*g + beta*k at generation g) so that
// argmin ties and level comparisons are exact; reals are derived on demand.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/pathgrid.hpp"
#include "brwx/rng.hpp"

namespace brwx::brw {

struct SimCaps {
  std::uint64_t max_particles = 200'000'000;  // hard cap per replica, all generations combined
};

struct Generation {
  std::vector<double> pos;
  std::vector<std::int64_t> lat;  // lattice coordinates; empty in non-lattice mode
  std::vector<std::uint32_t> parent;
  std::size_t size() const { return pos.size(); }
};

struct TreeRun {
  model::LatticeInfo lattice;
  int target_n = 0;
  std::vector<Generation> gens;  // gens[g] nonempty for g <= built()
  std::vector<double> W;         // additive martingale series
  std::vector<double> I;         // running minimum series
  std::optional<int> extinct_at;
  bool cap_hit = false;
  std::uint64_t particles = 0;

  int built() const { return static_cast<int>(gens.size()) - 1; }
  bool complete() const { return !cap_hit && !extinct_at && built() == target_n; }
  double position(int g, std::size_t i) const { return gens[static_cast<std::size_t>(g)].pos[i]; }
};

namespace detail {

// integer lattice offset of each displacement value: d = alpha + beta * j
struct LatticeSteps {
  bool active = false;
  double alpha = 0.0, beta = 0.0;
  std::vector<double> values;
  std::vector<std::int64_t> offsets;

  static LatticeSteps build(const model::OffspringLaw& law, const model::LatticeInfo& lat) {
    LatticeSteps ls;
    ls.active = lat.lattice;
    if (!ls.active) return ls;
    ls.alpha = lat.offset;
    ls.beta = lat.span;
    for (double d : law.displacement_support()) {
      std::int64_t j = std::llround((d - ls.alpha) / ls.beta);
      if (std::fabs(d - (ls.alpha + ls.beta * static_cast<double>(j))) > 1e-9) {
        ls.active = false;  // inconsistent span; fall back to real arithmetic
        return ls;
      }
      ls.values.push_back(d);
      ls.offsets.push_back(j);
    }
    return ls;
  }

  std::int64_t offset_of(double d) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (std::fabs(values[i] - d) <= 1e-9) return offsets[i];
    throw std::logic_error("displacement not in law support");
  }
};

}  // namespace detail

inline TreeRun simulate(const model::OffspringLaw& law, int n, const SimCaps& caps, rng::Engine& eng) {
  if (n < 0) throw std::invalid_argument("simulate: n < 0");
  TreeRun run;
  run.lattice = model::lattice_structure(law);
  run.target_n = n;
  auto ls = detail::LatticeSteps::build(law, run.lattice);
  if (!ls.active) run.lattice.lattice = false;

  Generation root;
  root.pos = {0.0};
  root.parent = {0};
  if (ls.active) root.lat = {0};
  run.gens.push_back(std::move(root));
  run.particles = 1;
  run.W.push_back(1.0);
  run.I.push_back(0.0);

  std::vector<double> children;
  for (int g = 0; g < n; ++g) {
    const Generation& cur = run.gens.back();
    Generation next;
    numeric::Kahan w;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      law.sample_into(eng, children);
      if (run.particles + children.size() > caps.max_particles ||
          next.size() + children.size() > std::numeric_limits<std::uint32_t>::max()) {
        run.cap_hit = true;
        return run;
      }
      for (double d : children) {
        double p = cur.pos[i] + d;
        if (ls.active) {
          std::int64_t k = cur.lat[i] + ls.offset_of(d);
          next.lat.push_back(k);
          p = ls.alpha * static_cast<double>(g + 1) + ls.beta * static_cast<double>(k);
        }
        next.pos.push_back(p);
        next.parent.push_back(static_cast<std::uint32_t>(i));
        w.add(std::exp(-p));
      }
      run.particles += children.size();
    }
    if (next.size() == 0) {
      run.extinct_at = g + 1;
      return run;
    }
    double mn;
    if (ls.active) {
      std::int64_t kmin = next.lat[0];
      for (std::int64_t k : next.lat) kmin = std::min(kmin, k);
      mn = ls.alpha * static_cast<double>(g + 1) + ls.beta * static_cast<double>(kmin);
    } else {
      mn = next.pos[0];
      for (double p : next.pos) mn = std::min(mn, p);
    }
    run.gens.push_back(std::move(next));
    run.W.push_back(w.value());
    run.I.push_back(mn);
  }
  return run;
}

struct MinPath {
  std::vector<double> values;  // values[k] = position of the k-th ancestor of the chosen minimizer
  std::uint64_t argmin_count = 0;
  std::uint64_t chosen_index = 0;
};

inline MinPath leftmost_path(const TreeRun& run, rng::Engine& eng) {
  if (!run.complete()) throw std::invalid_argument("leftmost_path: run is extinct, capped, or incomplete");
  const Generation& last = run.gens.back();
  std::vector<std::size_t> ties;
  if (!last.lat.empty()) {
    std::int64_t kmin = last.lat[0];
    for (std::int64_t k : last.lat) kmin = std::min(kmin, k);
    for (std::size_t i = 0; i < last.lat.size(); ++i)
      if (last.lat[i] == kmin) ties.push_back(i);
  } else {
    double mn = last.pos[0];
    for (double p : last.pos) mn = std::min(mn, p);
    for (std::size_t i = 0; i < last.pos.size(); ++i)
      if (last.pos[i] == mn) ties.push_back(i);
  }
  MinPath path;
  path.argmin_count = ties.size();
  std::size_t pick = std::min(static_cast<std::size_t>(rng::uniform01(eng) * static_cast<double>(ties.size())),
                              ties.size() - 1);
  path.chosen_index = ties[pick];
  int n = run.built();
  path.values.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::size_t idx = ties[pick];
  for (int g = n; g >= 0; --g) {
    path.values[static_cast<std::size_t>(g)] = run.position(g, idx);
    idx = run.gens[static_cast<std::size_t>(g)].parent[idx];
  }
  return path;
}

// s -> path(floor(s*n)) / (sigma sqrt(n)) sampled on the uniform grid j/G
inline PathGrid rescale_path(const std::vector<double>& path_values, double sigma, int grid_size) {
  int n = static_cast<int>(path_values.size()) - 1;
  if (n < 1) throw std::invalid_argument("rescale_path: need n >= 1");
  if (grid_size < 1) throw std::invalid_argument("rescale_path: grid_size < 1");
  PathGrid grid;
  grid.grid_size = grid_size;
  grid.values.resize(static_cast<std::size_t>(grid_size) + 1);
  double scale = 1.0 / (sigma * std::sqrt(static_cast<double>(n)));
  for (int j = 0; j <= grid_size; ++j) {
    std::size_t k = static_cast<std::size_t>((static_cast<std::int64_t>(j) * n) / grid_size);
    grid.values[static_cast<std::size_t>(j)] = path_values[k] * scale;
  }
  return grid;
}

inline PathGrid rescale_path(const MinPath& path, double sigma, int grid_size) {
  return rescale_path(path.values, sigma, grid_size);
}

// minimum over generation-n particles whose whole ancestral path stayed >= 0
inline std::optional<double> killed_min(const TreeRun& run, double barrier_tol = 1e-9) {
  if (run.gens.empty()) return std::nullopt;
  std::vector<char> alive{run.gens[0].pos[0] >= -barrier_tol};
  if (run.built() == 0) return alive[0] ? std::optional<double>(run.gens[0].pos[0]) : std::nullopt;
  std::vector<char> next;
  for (int g = 1; g <= run.built(); ++g) {
    const Generation& cur = run.gens[static_cast<std::size_t>(g)];
    next.assign(cur.size(), 0);
    for (std::size_t i = 0; i < cur.size(); ++i)
      next[i] = alive[cur.parent[i]] && cur.pos[i] >= -barrier_tol;
    alive.swap(next);
  }
  const Generation& last = run.gens.back();
  std::optional<double> mn;
  for (std::size_t i = 0; i < last.size(); ++i)
    if (alive[i] && (!mn || last.pos[i] < *mn)) mn = last.pos[i];
  return mn;
}

struct StoppingLine {
  struct Entry {
    int generation;
    double position;
  };
  std::vector<Entry> entries;
  double sum_exp = 0.0;   // sum of e^{-V} over the line
  double sum_vexp = 0.0;  // sum of V e^{-V}
  bool truncated = false; // some ray neither crossed nor died within the run
};

// first-crossing particles over level A: V(u) >= A and every strict ancestor < A
inline StoppingLine stopping_line(const TreeRun& run, double level) {
  if (level < 0.0) throw std::invalid_argument("stopping_line: level < 0");
  StoppingLine line;
  numeric::Kahan se, sv;
  if (run.gens.empty()) return line;
  std::vector<char> crossed(1, run.gens[0].pos[0] >= level);
  if (crossed[0]) {
    line.entries.push_back({0, run.gens[0].pos[0]});
    se.add(std::exp(-run.gens[0].pos[0]));
    sv.add(run.gens[0].pos[0] * std::exp(-run.gens[0].pos[0]));
  }
  std::vector<char> next;
  for (int g = 1; g <= run.built(); ++g) {
    const Generation& cur = run.gens[static_cast<std::size_t>(g)];
    next.assign(cur.size(), 0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (crossed[cur.parent[i]]) {
        next[i] = 1;
        continue;
      }
      if (cur.pos[i] >= level) {
        next[i] = 1;
        line.entries.push_back({g, cur.pos[i]});
        se.add(std::exp(-cur.pos[i]));
        sv.add(cur.pos[i] * std::exp(-cur.pos[i]));
      }
    }
    crossed.swap(next);
  }
  // an extinct run ends its uncrossed rays by death, which is not truncation
  if (!run.extinct_at)
    for (std::size_t i = 0; i < run.gens.back().size(); ++i)
      if (!crossed[i]) line.truncated = true;
  if (run.cap_hit) line.truncated = true;
  line.sum_exp = se.value();
  line.sum_vexp = sv.value();
  return line;
}

// streaming variant for deep lines: only the not-yet-crossed frontier is kept,
// so the cost is the number of particles that ever lived below the level
struct LineSimResult {
  StoppingLine line;
  std::uint64_t processed = 0;
};

inline LineSimResult simulate_stopping_line(const model::OffspringLaw& law, double level, int max_gen,
                                            const SimCaps& caps, rng::Engine& eng) {
  if (level < 0.0) throw std::invalid_argument("simulate_stopping_line: level < 0");
  LineSimResult out;
  numeric::Kahan se, sv;
  std::vector<double> frontier{0.0}, next;
  out.processed = 1;
  if (0.0 >= level) {
    out.line.entries.push_back({0, 0.0});
    out.line.sum_exp = 1.0;
    out.line.sum_vexp = 0.0;
    return out;
  }
  std::vector<double> children;
  for (int g = 1; g <= max_gen && !frontier.empty(); ++g) {
    next.clear();
    for (double p : frontier) {
      law.sample_into(eng, children);
      for (double d : children) {
        double q = p + d;
        ++out.processed;
        if (out.processed > caps.max_particles) {
          out.line.truncated = true;
          out.line.sum_exp = se.value();
          out.line.sum_vexp = sv.value();
          return out;
        }
        if (q >= level) {
          out.line.entries.push_back({g, q});
          se.add(std::exp(-q));
          sv.add(q * std::exp(-q));
        } else {
          next.push_back(q);
        }
      }
    }
    frontier.swap(next);
  }
  out.line.truncated = !frontier.empty();
  out.line.sum_exp = se.value();
  out.line.sum_vexp = sv.value();
  return out;
}

// level sequence: 3/2 ln n - z, aligned to the generation-n lattice when the
// displacement law is lattice
inline double a_n(double z, int n, const model::LatticeInfo& lat) {
  if (n < 1) throw std::invalid_argument("a_n: n < 1");
  double base = 1.5 * std::log(static_cast<double>(n));
  if (!lat.lattice) return base - z;
  double an = lat.offset * n + lat.span * std::floor((base - lat.offset * n) / lat.span);
  return an - z;
}

struct PathEventParams {
  double z = 0.0;
  double K = 0.0;
  double L = 0.0;
  double delta = 0.5;
};

struct PathEventReport {
  bool endpoint_below = false;  // V(u_n) <= a_n(z)
  bool min_above = false;       // min_k V(u_k) >= -z + K
  bool late_min_above = false;  // min_{ceil(delta n) <= k <= n} V(u_k) >= a_n(z+L)
  bool in_J() const { return endpoint_below && min_above && late_min_above; }
};

inline PathEventReport path_diagnostics(const std::vector<double>& path_values, const PathEventParams& p,
                                        const model::LatticeInfo& lat) {
  constexpr double tol = 1e-12;
  int n = static_cast<int>(path_values.size()) - 1;
  if (n < 1) throw std::invalid_argument("path_diagnostics: need n >= 1");
  PathEventReport r;
  double az = a_n(p.z, n, lat);
  double azl = a_n(p.z + p.L, n, lat);
  r.endpoint_below = path_values[static_cast<std::size_t>(n)] <= az + tol;
  double mn = path_values[0];
  for (double v : path_values) mn = std::min(mn, v);
  r.min_above = mn >= -p.z + p.K - tol;
  int k0 = static_cast<int>(std::ceil(p.delta * n - tol));
  double late = path_values[static_cast<std::size_t>(std::clamp(k0, 0, n))];
  for (int k = std::clamp(k0, 0, n); k <= n; ++k) late = std::min(late, path_values[static_cast<std::size_t>(k)]);
  r.late_min_above = late >= azl - tol;
  return r;
}

// debug dump for tiny runs
inline void dump_csv(const TreeRun& run, std::ostream& os) {
  if (run.built() > 12) throw std::invalid_argument("dump_csv: only for runs with n <= 12");
  os << "#schema=1\ngeneration,index,parent,position\n";
  char buf[64];
  for (int g = 0; g <= run.built(); ++g) {
    const Generation& gen = run.gens[static_cast<std::size_t>(g)];
    for (std::size_t i = 0; i < gen.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", gen.pos[i]);
      os << g << ',' << i << ',' << (g == 0 ? 0 : gen.parent[i]) << ',' << buf << '\n';
    }
  }
}

}  // namespace brwx::brw
