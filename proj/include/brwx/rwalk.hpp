#pragma once

// The centered random walk associated with a boundary law through
//   P(S_1 = x) = E[ sum_children 1{child at x} e^{-x} ],
// a probability measure exactly when the law is boundary-normalized.
// Walk-level machinery: strict-descending-ladder renewal function, exact
// stay-positive DP, and ballot-type n^{-3/2} envelope probes. Exact DPs
// require an arithmetic support (all step values in unit*Z for a common
// unit); incommensurable supports fall back to Monte Carlo.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "brwx/model.hpp"
#include "brwx/numeric.hpp"
#include "brwx/rng.hpp"

namespace brwx::rwalk {

struct StepLaw {
  std::vector<double> values;
  std::vector<double> probs;
  model::LatticeInfo lattice;  // lattice structure of the displacement law
  double mean = 0.0;
  double sigma2 = 0.0;
  bool arithmetic = false;  // all values in unit * Z
  double unit = 0.0;
  std::vector<long long> steps;  // values / unit when arithmetic

  StepLaw negated() const {
    StepLaw s = *this;
    for (double& v : s.values) v = -v;
    for (auto& k : s.steps) k = -k;
    s.mean = -s.mean;
    // offset flips modulo the span
    if (s.lattice.lattice && s.lattice.offset != 0.0) s.lattice.offset = s.lattice.span - s.lattice.offset;
    return s;
  }
};

inline StepLaw step_law(const model::OffspringLaw& law, double tol = 1e-10) {
  // the masses form a centered probability law exactly under the
  // normalization conditions; supercriticality is irrelevant here
  model::BoundaryReport rep = model::check_boundary(law, tol);
  if (!rep.normalized || !rep.centered || !rep.sigma2_finite)
    throw std::invalid_argument("step_law: law is not boundary-normalized");
  std::map<double, double> mass;
  law.for_each_atom([&](double p, std::span<const double> ch) {
    for (double x : ch) mass[x] += p * std::exp(-x);
  });
  StepLaw s;
  for (const auto& [int_x, m] : mass) {
    s.values.push_back(int_x);
    s.probs.push_back(m);
  }
  s.lattice = model::lattice_structure(law);
  double tot = 0.0, mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    tot += s.probs[i];
    mean += s.values[i] * s.probs[i];
  }
  for (std::size_t i = 0; i < s.values.size(); ++i) var += s.values[i] * s.values[i] * s.probs[i];
  if (std::fabs(tot - 1.0) > 1e-9) throw std::invalid_argument("step_law: masses do not sum to 1");
  s.mean = mean;
  s.sigma2 = var;  // second moment; the walk is centered so this is the variance
  // arithmetic unit: gcd of the absolute step values; supports spanning more
  // than 4096 lattice units are treated as incommensurable (a near-zero gcd
  // of irrational values would otherwise fake a unit)
  double g = 0.0;
  for (double v : s.values) g = numeric::real_gcd(g, v, 1e-9);
  if (g > 1e-9) {
    s.arithmetic = true;
    s.unit = g;
    for (double v : s.values) {
      long long k = std::llround(v / g);
      if (std::fabs(v - g * static_cast<double>(k)) > 1e-9 || std::llabs(k) > 4096) {
        s.arithmetic = false;
        break;
      }
      s.steps.push_back(k);
    }
    if (!s.arithmetic) s.steps.clear();
  }
  return s;
}

inline std::vector<double> simulate_walk(const StepLaw& step, int n, double start, rng::Engine& eng) {
  if (n < 0) throw std::invalid_argument("simulate_walk: n < 0");
  std::vector<double> path(static_cast<std::size_t>(n) + 1);
  path[0] = start;
  if (step.arithmetic) {
    long long k = 0;
    for (int i = 1; i <= n; ++i) {
      k += step.steps[rng::categorical(eng, step.probs)];
      path[static_cast<std::size_t>(i)] = start + step.unit * static_cast<double>(k);
    }
  } else {
    double s = start;
    for (int i = 1; i <= n; ++i) {
      s += step.values[rng::categorical(eng, step.probs)];
      path[static_cast<std::size_t>(i)] = s;
    }
  }
  return path;
}

// Distribution of the first strict descending ladder height -S_tau,
// tau = inf{k >= 1 : S_k < 0}, computed by an exact killed-walk DP on the
// arithmetic lattice. `unresolved` is the probability mass whose ladder
// epoch was not resolved by k_max (including mass parked above the band);
// it bounds the truncation error of everything derived from this table.
struct LadderDist {
  double unit = 0.0;
  std::vector<double> prob;  // prob[h] = P(height == h * unit), h >= 1; prob[0] unused
  double unresolved = 0.0;
};

inline LadderDist ladder_heights(const StepLaw& step, long long k_max, int band = 2048) {
  if (!step.arithmetic) throw std::invalid_argument("ladder_heights: step law is not arithmetic");
  long long max_down = 0, max_up = 0;
  for (long long k : step.steps) {
    max_down = std::min(max_down, k);
    max_up = std::max(max_up, k);
  }
  if (max_down == 0) throw std::invalid_argument("ladder_heights: walk never decreases");
  if (-max_down > band) throw std::invalid_argument("ladder_heights: step size exceeds the band");
  LadderDist out;
  out.unit = step.unit;
  out.prob.assign(static_cast<std::size_t>(-max_down) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(band), 0.0), nv(static_cast<std::size_t>(band), 0.0);
  v[0] = 1.0;
  double escaped = 0.0;
  long long hi = 1;  // exclusive upper bound of occupied states
  for (long long k = 0; k < k_max; ++k) {
    long long nhi = std::min<long long>(band, hi + max_up);
    std::fill(nv.begin(), nv.begin() + nhi, 0.0);
    for (long long j = 0; j < hi; ++j) {
      double m = v[static_cast<std::size_t>(j)];
      if (m == 0.0) continue;
      for (std::size_t si = 0; si < step.steps.size(); ++si) {
        double mm = m * step.probs[si];
        long long j2 = j + step.steps[si];
        if (j2 < 0)
          out.prob[static_cast<std::size_t>(-j2)] += mm;
        else if (j2 >= band)
          escaped += mm;
        else
          nv[static_cast<std::size_t>(j2)] += mm;
      }
    }
    v.swap(nv);
    hi = nhi;
    if ((k & 4095) == 0) {
      double alive = 0.0;
      for (long long j = 0; j < hi; ++j) alive += v[static_cast<std::size_t>(j)];
      if (alive < 1e-15) {
        out.unresolved = escaped;
        return out;
      }
    }
  }
  double alive = 0.0;
  for (double m : v) alive += m;
  out.unresolved = escaped + alive;
  return out;
}

struct RenewalResult {
  double value = 0.0;
  double unresolved = 0.0;  // truncation bound carried from the ladder table
};

// R(x) = 1{x=0} + 1{x>0} (1 + expected number of strict descending ladder
// points at depth <= x), evaluated from the ladder-height renewal sequence.
inline RenewalResult renewal_R(const LadderDist& ladder, double x) {
  if (x < 0.0) throw std::invalid_argument("renewal_R: x < 0");
  if (x == 0.0) return {1.0, 0.0};
  long long levels = static_cast<long long>(std::floor(x / ladder.unit + 1e-9));
  std::vector<double> u(static_cast<std::size_t>(levels) + 1, 0.0);
  u[0] = 1.0;
  double r = 1.0;
  for (long long l = 1; l <= levels; ++l) {
    double s = 0.0;
    for (std::size_t h = 1; h < ladder.prob.size() && static_cast<long long>(h) <= l; ++h)
      s += ladder.prob[h] * u[static_cast<std::size_t>(l - static_cast<long long>(h))];
    u[static_cast<std::size_t>(l)] = s;
    r += s;
  }
  return {r, ladder.unresolved};
}

inline RenewalResult renewal_R(const StepLaw& step, double x, long long k_max, int band = 2048) {
  return renewal_R(ladder_heights(step, k_max, band), x);
}

// Monte Carlo fallback for incommensurable supports: counts strict
// descending ladder points not below -x along walks of length k_max.
struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

inline McEstimate renewal_R_mc(const StepLaw& step, double x, long long k_max, int replicas, rng::Engine& eng) {
  if (x < 0.0) throw std::invalid_argument("renewal_R_mc: x < 0");
  if (x == 0.0) return {1.0, 0.0};
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < replicas; ++r) {
    double s = 0.0, runmin = 0.0;
    long long count = 0;
    for (long long k = 0; k < k_max; ++k) {
      s += step.values[rng::categorical(eng, step.probs)];
      if (s < runmin) {
        runmin = s;
        if (s >= -x) ++count;
        if (s < -x) break;  // deeper ladder points can never re-enter [-x, 0)
      }
    }
    double val = 1.0 + static_cast<double>(count);
    sum += val;
    sum2 += val * val;
  }
  double mean = sum / replicas;
  double var = std::max(0.0, sum2 / replicas - mean * mean);
  return {mean, std::sqrt(var / replicas)};
}

struct SurvivalResult {
  double p = 0.0;
  double se = 0.0;         // zero in DP mode
  double band_mass = 0.0;  // mass parked at the upper band edge (counted alive)
};

enum class Mode { dp, mc };

// P_a(min_{0<=k<=n} S_k >= 0), exact DP over the arithmetic lattice with the
// state space truncated at 64 sigma sqrt(n); the parked mass is reported.
inline SurvivalResult survival_prob(const StepLaw& step, int n, double start, Mode mode = Mode::dp,
                                    int replicas = 100000, rng::Engine* eng = nullptr) {
  if (start < 0.0) return {0.0, 0.0, 0.0};
  if (n == 0) return {1.0, 0.0, 0.0};
  if (mode == Mode::mc) {
    if (!eng) throw std::invalid_argument("survival_prob: mc mode needs an engine");
    long long hits = 0;
    for (int r = 0; r < replicas; ++r) {
      double s = start;
      bool ok = true;
      for (int k = 0; k < n && ok; ++k) {
        s += step.values[rng::categorical(*eng, step.probs)];
        ok = s >= -1e-12;
      }
      hits += ok;
    }
    double p = static_cast<double>(hits) / replicas;
    return {p, std::sqrt(p * (1.0 - p) / replicas), 0.0};
  }
  if (!step.arithmetic) throw std::invalid_argument("survival_prob: dp mode needs an arithmetic step law");
  long long j0 = std::llround(start / step.unit);
  if (std::fabs(start - step.unit * static_cast<double>(j0)) > 1e-9)
    throw std::invalid_argument("survival_prob: start is off the walk lattice");
  long long jmax = static_cast<long long>(std::ceil(64.0 * std::sqrt(step.sigma2 * n) / step.unit));
  std::vector<double> v(static_cast<std::size_t>(jmax), 0.0), nv(static_cast<std::size_t>(jmax), 0.0);
  if (j0 >= jmax) return {1.0, 0.0, 1.0};
  v[static_cast<std::size_t>(j0)] = 1.0;
  double high = 0.0;
  for (int k = 0; k < n; ++k) {
    std::fill(nv.begin(), nv.end(), 0.0);
    for (long long j = 0; j < jmax; ++j) {
      double m = v[static_cast<std::size_t>(j)];
      if (m == 0.0) continue;
      for (std::size_t si = 0; si < step.steps.size(); ++si) {
        long long j2 = j + step.steps[si];
        if (j2 < 0) continue;  // killed
        double mm = m * step.probs[si];
        if (j2 >= jmax)
          high += mm;
        else
          nv[static_cast<std::size_t>(j2)] += mm;
      }
    }
    v.swap(nv);
  }
  double alive = high;
  for (double m : v) alive += m;
  return {alive, 0.0, high};
}

struct BallotProbeParams {
  double x = 0.0;       // kill barrier at -x (equivalently: start at x, barrier 0)
  double a = 0.0;       // terminal window [y+a, y+b] relative to the barrier frame
  double b = 1.0;
  double lambda = 0.0;  // 0: plain stay-positive; >0: extra window min_{[lambda n, n]} >= y
  double y = 0.0;
  int n_ref = 100;
  std::vector<int> n_checks = {400, 900};
};

struct BallotProbeResult {
  bool applicable = true;
  double lhs_ref = 0.0;
  double c_fit = 0.0;  // lhs_ref / ((1+x)(1+b-a)(1+b) n_ref^{-3/2})
  // `within` carries 10% headroom: the n^{3/2}-scaled probability approaches
  // its limit from below, so a sharp fit at n_ref undershoots at larger n.
  // The probe tracks the n^{-3/2} order, not the sharp constant.
  static constexpr double kHeadroom = 1.1;
  struct Point {
    int n;
    double lhs;
    double envelope;
    bool within;
  };
  std::vector<Point> points;
};

namespace detail {

// P_x(S_n in [y+a, y+b], min_{k<=n} S_k >= 0, min_{lambda n <= k <= n} S_k >= y)
inline double ballot_lhs(const StepLaw& step, const BallotProbeParams& p, int n) {
  long long j0 = std::llround(p.x / step.unit);
  long long jy = std::llround(p.y / step.unit);
  long long jmax = static_cast<long long>(std::ceil(64.0 * std::sqrt(step.sigma2 * std::max(n, 1)) / step.unit)) +
                   std::max(j0, jy) + 2;
  int split = p.lambda > 0.0 ? static_cast<int>(std::ceil(p.lambda * n)) : n + 1;
  std::vector<double> v(static_cast<std::size_t>(jmax), 0.0), nv(static_cast<std::size_t>(jmax), 0.0);
  if (j0 < 0 || j0 >= jmax) return 0.0;
  v[static_cast<std::size_t>(j0)] = 1.0;
  for (int k = 1; k <= n; ++k) {
    long long barrier = (k >= split) ? jy : 0;
    std::fill(nv.begin(), nv.end(), 0.0);
    for (long long j = 0; j < jmax; ++j) {
      double m = v[static_cast<std::size_t>(j)];
      if (m == 0.0) continue;
      for (std::size_t si = 0; si < step.steps.size(); ++si) {
        long long j2 = j + step.steps[si];
        if (j2 < barrier || j2 >= jmax) continue;
        nv[static_cast<std::size_t>(j2)] += m * step.probs[si];
      }
    }
    v.swap(nv);
  }
  double lo = p.y + p.a - 1e-9, hi = p.y + p.b + 1e-9;
  double out = 0.0;
  for (long long j = 0; j < jmax; ++j) {
    double pos = step.unit * static_cast<double>(j);
    if (pos >= lo && pos <= hi) out += v[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace detail

// Fits the n^{-3/2} envelope constant at n_ref and reports whether larger n
// stay under it. A probe: the result is data, not a verdict on the constant.
inline BallotProbeResult ballot_bound_probe(const StepLaw& step, const BallotProbeParams& p) {
  BallotProbeResult out;
  if (step.sigma2 <= 0.0 || !step.arithmetic) {
    out.applicable = false;  // degenerate or incommensurable walk: envelope meaningless
    return out;
  }
  out.lhs_ref = detail::ballot_lhs(step, p, p.n_ref);
  double shape = (1.0 + p.x) * (1.0 + p.b - p.a) * (1.0 + p.b);
  out.c_fit = out.lhs_ref / (shape * std::pow(static_cast<double>(p.n_ref), -1.5));
  for (int n : p.n_checks) {
    double lhs = detail::ballot_lhs(step, p, n);
    double env = out.c_fit * shape * std::pow(static_cast<double>(n), -1.5);
    out.points.push_back({n, lhs, env, lhs <= env * BallotProbeResult::kHeadroom});
  }
  return out;
}

}  // namespace brwx::rwalk
