#pragma once

// Finite-support offspring laws for a branching random walk and the checks
// that qualify one as boundary-normalized:
//   E[#children] > 1,   E[sum_children e^{-x}] = 1,   E[sum_children x e^{-x}] = 0.
// Only finite-support laws are supported; every moment here is an exact
// finite sum, which is what makes the enumeration oracles exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brwx/numeric.hpp"
#include "brwx/rng.hpp"

namespace brwx::model {

struct LatticeInfo {
  bool lattice = false;
  double span = 0.0;    // beta; support lies in offset + span * Z
  double offset = 0.0;  // alpha in [0, beta)
};

struct Atom {
  double prob = 0.0;
  std::vector<double> children;  // displacements relative to the parent
};

struct CountDist {
  std::vector<int> values;
  std::vector<double> probs;
};

struct DisplacementDist {
  std::vector<double> values;
  std::vector<double> probs;
};

struct CalibrationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class OffspringLaw {
 public:
  enum class Form { explicit_atoms, product };

  static OffspringLaw from_atoms(std::vector<Atom> atoms) {
    OffspringLaw law;
    law.form_ = Form::explicit_atoms;
    law.atoms_ = std::move(atoms);
    law.validate();
    return law;
  }

  // children count drawn from `count`, displacements i.i.d. from `disp`
  static OffspringLaw product(CountDist count, DisplacementDist disp) {
    OffspringLaw law;
    law.form_ = Form::product;
    law.count_ = std::move(count);
    law.disp_ = std::move(disp);
    law.validate();
    return law;
  }

  Form form() const { return form_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const CountDist& count_dist() const { return count_; }
  const DisplacementDist& displacement_dist() const { return disp_; }

  void validate() const {
    constexpr double tol = 1e-12;
    if (form_ == Form::explicit_atoms) {
      if (atoms_.empty()) throw std::invalid_argument("law: no atoms");
      double s = 0.0;
      for (const auto& a : atoms_) {
        if (a.prob < 0.0 || a.prob > 1.0) throw std::invalid_argument("law: atom prob outside [0,1]");
        for (double x : a.children)
          if (!std::isfinite(x)) throw std::invalid_argument("law: non-finite displacement");
        s += a.prob;
      }
      if (std::fabs(s - 1.0) > tol) throw std::invalid_argument("law: atom probabilities do not sum to 1");
    } else {
      check_dist(count_.probs, "count");
      check_dist(disp_.probs, "displacement");
      if (count_.values.size() != count_.probs.size() || disp_.values.size() != disp_.probs.size())
        throw std::invalid_argument("law: values/probs length mismatch");
      for (int n : count_.values)
        if (n < 0) throw std::invalid_argument("law: negative child count");
      for (double x : disp_.values)
        if (!std::isfinite(x)) throw std::invalid_argument("law: non-finite displacement");
    }
  }

  // Enumerate atoms as (prob, children). Product laws expand to ordered
  // displacement tuples; the expansion is capped so it stays an exact,
  // cheap finite sum. All moment queries below go through this, so the
  // product and explicit representations agree by construction.
  void for_each_atom(const std::function<void(double, std::span<const double>)>& fn) const {
    if (form_ == Form::explicit_atoms) {
      for (const auto& a : atoms_) fn(a.prob, a.children);
      return;
    }
    check_expandable();
    std::vector<double> tuple;
    for (std::size_t ci = 0; ci < count_.values.size(); ++ci) {
      int n = count_.values[ci];
      double pc = count_.probs[ci];
      if (pc == 0.0) continue;
      tuple.assign(static_cast<std::size_t>(n), 0.0);
      expand_rec(fn, tuple, 0, n, pc);
    }
  }

  OffspringLaw expanded() const {
    std::vector<Atom> out;
    for_each_atom([&](double p, std::span<const double> ch) {
      out.push_back(Atom{p, std::vector<double>(ch.begin(), ch.end())});
    });
    return from_atoms(std::move(out));
  }

  std::vector<double> displacement_support() const {
    std::vector<double> xs;
    if (form_ == Form::product) {
      for (std::size_t i = 0; i < disp_.values.size(); ++i)
        if (disp_.probs[i] > 0.0 && max_count() > 0) xs.push_back(disp_.values[i]);
    } else {
      for (const auto& a : atoms_)
        if (a.prob > 0.0)
          for (double x : a.children) xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
  }

  int max_count() const {
    if (form_ == Form::explicit_atoms) {
      std::size_t m = 0;
      for (const auto& a : atoms_)
        if (a.prob > 0.0) m = std::max(m, a.children.size());
      return static_cast<int>(m);
    }
    int m = 0;
    for (std::size_t i = 0; i < count_.values.size(); ++i)
      if (count_.probs[i] > 0.0) m = std::max(m, count_.values[i]);
    return m;
  }

  double mean_offspring() const {
    if (form_ == Form::product) {
      double s = 0.0;
      for (std::size_t i = 0; i < count_.values.size(); ++i) s += count_.values[i] * count_.probs[i];
      return s;
    }
    double s = 0.0;
    for (const auto& a : atoms_) s += a.prob * static_cast<double>(a.children.size());
    return s;
  }

  // psi(theta) = ln E[sum_children e^{-theta x}]
  double log_laplace(double theta) const {
    if (!std::isfinite(theta)) throw std::invalid_argument("log_laplace: non-finite theta");
    return std::log(moment([&](double x) { return std::exp(-theta * x); }));
  }

  // E[sum x e^{-theta x}]
  double tilt_mean(double theta) const {
    return moment([&](double x) { return x * std::exp(-theta * x); });
  }

  // E[sum x^2 e^{-x}]
  double sigma2() const {
    return moment([](double x) { return x * x * std::exp(-x); });
  }

  // E[X (log+ X)^2] with X = sum_children e^{-x}; atom-level, needs expansion
  double x_log2_moment() const {
    double s = 0.0;
    for_each_atom([&](double p, std::span<const double> ch) {
      double X = 0.0;
      for (double x : ch) X += std::exp(-x);
      double l = X > 1.0 ? std::log(X) : 0.0;
      s += p * X * l * l;
    });
    return s;
  }

  // E[Xt log+ Xt] with Xt = sum_children x_+ e^{-x}
  double xtilde_log_moment() const {
    double s = 0.0;
    for_each_atom([&](double p, std::span<const double> ch) {
      double X = 0.0;
      for (double x : ch) X += std::max(x, 0.0) * std::exp(-x);
      s += p * X * (X > 1.0 ? std::log(X) : 0.0);
    });
    return s;
  }

  std::vector<double> sample(rng::Engine& eng) const {
    std::vector<double> out;
    sample_into(eng, out);
    return out;
  }

  void sample_into(rng::Engine& eng, std::vector<double>& out) const {
    out.clear();
    if (form_ == Form::explicit_atoms) {
      std::size_t i = pick(eng, atom_probs());
      out.assign(atoms_[i].children.begin(), atoms_[i].children.end());
      return;
    }
    int n = count_.values[pick(eng, count_.probs)];
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(disp_.values[pick(eng, disp_.probs)]);
  }

 private:
  Form form_ = Form::explicit_atoms;
  std::vector<Atom> atoms_;
  CountDist count_;
  DisplacementDist disp_;
  mutable std::vector<double> atom_probs_cache_;

  static void check_dist(const std::vector<double>& probs, const char* what) {
    if (probs.empty()) throw std::invalid_argument(std::string("law: empty ") + what + " distribution");
    double s = 0.0;
    for (double p : probs) {
      if (p < 0.0 || p > 1.0) throw std::invalid_argument(std::string("law: ") + what + " prob outside [0,1]");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-12)
      throw std::invalid_argument(std::string("law: ") + what + " probabilities do not sum to 1");
  }

  void check_expandable() const {
    constexpr int kMaxCountSupport = 8;
    if (max_count() > kMaxCountSupport)
      throw std::invalid_argument("law: product expansion limited to count support <= 8");
    double tuples = 0.0;
    for (std::size_t i = 0; i < count_.values.size(); ++i)
      if (count_.probs[i] > 0.0) tuples += std::pow((double)disp_.values.size(), count_.values[i]);
    if (tuples > 1e6) throw std::invalid_argument("law: product expansion too large");
  }

  void expand_rec(const std::function<void(double, std::span<const double>)>& fn, std::vector<double>& tuple,
                  int at, int n, double prob) const {
    if (at == n) {
      fn(prob, tuple);
      return;
    }
    for (std::size_t i = 0; i < disp_.values.size(); ++i) {
      if (disp_.probs[i] == 0.0) continue;
      tuple[static_cast<std::size_t>(at)] = disp_.values[i];
      expand_rec(fn, tuple, at + 1, n, prob * disp_.probs[i]);
    }
  }

  double moment(const std::function<double(double)>& weight) const {
    // child-level moments only need the marginal displacement law
    if (form_ == Form::product) {
      double per_child = 0.0;
      for (std::size_t i = 0; i < disp_.values.size(); ++i) per_child += disp_.probs[i] * weight(disp_.values[i]);
      return mean_offspring() * per_child;
    }
    double s = 0.0;
    for (const auto& a : atoms_) {
      double t = 0.0;
      for (double x : a.children) t += weight(x);
      s += a.prob * t;
    }
    return s;
  }

  std::span<const double> atom_probs() const {
    if (atom_probs_cache_.size() != atoms_.size()) {
      atom_probs_cache_.clear();
      for (const auto& a : atoms_) atom_probs_cache_.push_back(a.prob);
    }
    return atom_probs_cache_;
  }

  static std::size_t pick(rng::Engine& eng, std::span<const double> probs) {
    return rng::categorical(eng, probs);
  }
};

struct BoundaryReport {
  double mean_offspring = 0.0;
  double psi1 = 0.0;        // psi(1) = ln E[sum e^{-x}]
  double psi1_deriv = 0.0;  // reported as E[sum x e^{-x}]
  double sigma2 = 0.0;
  double x_log2_moment = 0.0;
  double xtilde_log_moment = 0.0;
  bool supercritical = false;
  bool normalized = false;
  bool centered = false;
  bool sigma2_finite = false;
  bool integrable = false;
  bool pass() const { return supercritical && normalized && centered && sigma2_finite && integrable; }
};

inline BoundaryReport check_boundary(const OffspringLaw& law, double tol = 1e-10) {
  BoundaryReport r;
  r.mean_offspring = law.mean_offspring();
  r.psi1 = law.log_laplace(1.0);
  r.psi1_deriv = law.tilt_mean(1.0);
  r.sigma2 = law.sigma2();
  r.x_log2_moment = law.x_log2_moment();
  r.xtilde_log_moment = law.xtilde_log_moment();
  r.supercritical = r.mean_offspring > 1.0;
  r.normalized = std::fabs(r.psi1) <= tol;
  r.centered = std::fabs(r.psi1_deriv) <= tol;
  r.sigma2_finite = std::isfinite(r.sigma2) && r.sigma2 >= 0.0;
  r.integrable = std::isfinite(r.x_log2_moment) && std::isfinite(r.xtilde_log_moment);
  return r;
}

inline double sigma(const OffspringLaw& law, double tol = 1e-10) {
  BoundaryReport r = check_boundary(law, tol);
  if (!r.pass()) throw std::invalid_argument("sigma: law is not in the boundary case");
  return std::sqrt(r.sigma2);
}

// Maximal-span detection on the displacement support. The support is lattice
// when the pairwise differences share a real gcd AND the residual offset is
// commensurable with that span (offset/span close to a small rational);
// a two-point support with an irrational offset/span ratio is classified
// non-lattice, which is the classification the level-sequence arithmetic
// uses downstream. Ties inside the tolerance resolve toward lattice.
inline LatticeInfo lattice_structure(const OffspringLaw& law) {
  constexpr double tol = 1e-9;
  constexpr int kMaxDenominator = 1024;
  LatticeInfo info;
  std::vector<double> xs = law.displacement_support();
  if (xs.empty()) {  // no children ever: degenerate, conventional unit span
    info.lattice = true;
    info.span = 1.0;
    info.offset = 0.0;
    return info;
  }
  if (xs.size() == 1) {
    info.lattice = true;
    info.span = 1.0;
    info.offset = xs[0] - std::floor(xs[0]);
    if (std::fabs(info.offset - 1.0) <= tol || std::fabs(info.offset) <= tol) info.offset = 0.0;
    return info;
  }
  double g = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) g = numeric::real_gcd(g, xs[i] - xs[0], tol);
  if (g <= tol) return info;  // incommensurable differences
  // verify every support point actually sits on x0 + g Z
  for (double x : xs) {
    double r = std::fabs(std::remainder(x - xs[0], g));
    if (r > tol && r < g - tol) return info;
  }
  double offset = xs[0] - g * std::floor(xs[0] / g);
  if (offset >= g - tol || offset <= tol) offset = 0.0;
  if (!numeric::nearly_rational(offset / g, kMaxDenominator, tol)) return info;
  info.lattice = true;
  info.span = g;
  info.offset = offset;
  return info;
}

// Tilt-and-shift normalization x -> theta* x + psi(theta*), where theta*
// solves theta psi'(theta) = psi(theta). The transformed law satisfies the
// boundary conditions exactly; a root exists only when the expected number
// of children at the minimal displacement is below one.
inline OffspringLaw calibrate(const OffspringLaw& raw, double theta_lo = 1e-3, double theta_hi = 50.0) {
  if (raw.mean_offspring() <= 1.0) throw CalibrationFailure("calibrate: law is not supercritical");
  if (raw.displacement_support().size() < 2)
    throw CalibrationFailure("calibrate: displacement support must have at least two points");
  auto g = [&](double th) {
    double psi = raw.log_laplace(th);
    double dpsi = -raw.tilt_mean(th) / std::exp(psi);  // psi'(theta)
    return th * dpsi - psi;
  };
  double lo = theta_lo, hi = theta_hi, glo = g(lo), ghi = g(hi);
  // g increases to -ln E[#children at the minimal displacement]; when that
  // count is exactly one the tangent sits at infinity and g saturates to 0
  // within double precision, which we accept as a degenerate tangent at the
  // bracket edge
  if (glo > 0.0 || ghi < -1e-9)
    throw CalibrationFailure("calibrate: no root of theta*psi'(theta)-psi(theta) in bracket");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) <= 0.0 ? lo : hi) = mid;
  }
  double theta = 0.5 * (lo + hi);
  double shift = raw.log_laplace(theta);
  auto map = [&](double x) { return theta * x + shift; };
  if (raw.form() == OffspringLaw::Form::product) {
    DisplacementDist d = raw.displacement_dist();
    for (double& x : d.values) x = map(x);
    return OffspringLaw::product(raw.count_dist(), std::move(d));
  }
  std::vector<Atom> atoms = raw.atoms();
  for (auto& a : atoms)
    for (double& x : a.children) x = map(x);
  return OffspringLaw::from_atoms(std::move(atoms));
}

// Closed-form boundary family: mean offspring m > 1, displacements +-c with
// c = arccosh(m), per-child P(-c) = e^{-c}/(2m). Then E[N] E[e^{-x}] = 1 and
// E[N] E[x e^{-x}] = 0 hold exactly, and sigma = c. Synthetic fixture; the
// count law is {floor(m), ceil(m)} with mean m.
inline OffspringLaw cosh_family(double m) {
  if (!(m > 1.0)) throw std::invalid_argument("cosh_family: need m > 1");
  double c = std::acosh(m);
  double p_down = std::exp(-c) / (2.0 * m);
  CountDist count;
  double frac = m - std::floor(m);
  if (frac < 1e-12) {
    count.values = {static_cast<int>(std::llround(m))};
    count.probs = {1.0};
  } else {
    count.values = {static_cast<int>(std::floor(m)), static_cast<int>(std::floor(m)) + 1};
    count.probs = {1.0 - frac, frac};
  }
  DisplacementDist disp;
  disp.values = {-c, c};
  disp.probs = {p_down, 1.0 - p_down};
  return OffspringLaw::product(std::move(count), std::move(disp));
}

// Two-point boundary family with exactly two children and displacements
// {-a, +b}: a solves b e^{-a} + a e^{b} = 2(a+b), which makes
// 2(p e^{a}) = b/(a+b) and 2((1-p) e^{-b}) = a/(a+b); the induced step law
// is centered by construction. For generic b the ratio a/b is irrational,
// giving the canonical non-lattice fixture.
inline OffspringLaw bin2_family(double b) {
  if (!(b > std::log(2.0))) throw std::invalid_argument("bin2_family: need b > ln 2");
  auto phi = [&](double a) { return b * std::exp(-a) + a * std::exp(b) - 2.0 * (a + b); };
  double lo = 1e-12, hi = 50.0;
  if (phi(lo) > 0.0 || phi(hi) < 0.0) throw std::invalid_argument("bin2_family: no root in bracket");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (phi(mid) <= 0.0 ? lo : hi) = mid;
  }
  double a = 0.5 * (lo + hi);
  double p = b * std::exp(-a) / (2.0 * (a + b));
  CountDist count{{2}, {1.0}};
  DisplacementDist disp{{-a, b}, {p, 1.0 - p}};
  return OffspringLaw::product(std::move(count), std::move(disp));
}

}  // namespace brwx::model
