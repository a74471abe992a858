#pragma once

// Lattice engine: bracketing discretization of a severity model onto a
// uniform grid, n-fold convolution powers, and compound (subordinated)
// distributions by truncated series or Panjer recursion.
//
// A lattice holds masses at k*step for k = 0..K (K*step = x_max) plus
// `tail_beyond`, the probability of a lattice value above x_max. With
// UPPER rounding each interval mass ((k-1)h, kh] sits at kh, with LOWER
// rounding at (k-1)h, so the two lattices bracket the continuous law in the
// usual stochastic order. Convolution preserves the ordering, which gives a
// verified interval for every tail computed from the pair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "subexp/counts.hpp"
#include "subexp/errors.hpp"
#include "subexp/models.hpp"
#include "subexp/numeric.hpp"

namespace subexp {

enum class Rounding { Upper, Lower };

inline const char* to_string(Rounding r) { return r == Rounding::Upper ? "upper" : "lower"; }

class LatticeDistribution {
 public:
  LatticeDistribution(double step, std::vector<double> masses, double tail_beyond, Rounding rounding)
      : step_(step), masses_(std::move(masses)), tail_beyond_(tail_beyond), rounding_(rounding) {
    if (!(step > 0.0)) throw ConfigError("lattice.step", "must be > 0");
    if (masses_.empty()) throw ConfigError("lattice", "empty grid");
    if (!(tail_beyond >= 0.0)) throw std::domain_error("tail_beyond must be >= 0");
    for (double m : masses_)
      if (!(m >= 0.0)) throw std::domain_error("lattice masses must be >= 0");
    build_suffix();
  }

  double step() const { return step_; }
  Rounding rounding() const { return rounding_; }
  std::span<const double> masses() const { return masses_; }
  double tail_beyond() const { return tail_beyond_; }
  /// Number of grid points, K + 1.
  std::size_t size() const { return masses_.size(); }
  std::size_t last_index() const { return masses_.size() - 1; }
  double x_max() const { return step_ * static_cast<double>(last_index()); }

  /// P(lattice value > k*step). Negative indices see the total mass. Past the
  /// grid the position of the beyond mass is unknown, so UPPER keeps all of
  /// it and LOWER none.
  double tail_at_index(long k) const {
    if (k < 0) return in_grid_total_ + tail_beyond_;
    if (static_cast<std::size_t>(k) >= masses_.size()) return rounding_ == Rounding::Upper ? tail_beyond_ : 0.0;
    return suffix_[static_cast<std::size_t>(k)] + tail_beyond_;
  }

  /// Mass strictly above index k inside the grid (excludes tail_beyond).
  double grid_mass_above(long k) const {
    if (k < 0) return in_grid_total_;
    if (static_cast<std::size_t>(k) >= masses_.size()) return 0.0;
    return suffix_[static_cast<std::size_t>(k)];
  }

  /// Tail at an arbitrary x, rounded to the grid in the direction that keeps
  /// the bracket valid (floor for UPPER, ceil for LOWER).
  double tail(double x) const { return tail_at_index(bracket_index(x)); }

  long bracket_index(double x) const {
    const double r = x / step_;
    const double near = std::round(r);
    if (std::fabs(r - near) <= 1e-9 * std::max(1.0, std::fabs(r))) return static_cast<long>(near);
    return static_cast<long>(rounding_ == Rounding::Upper ? std::floor(r) : std::ceil(r));
  }

  double total_mass() const { return in_grid_total_ + tail_beyond_; }

  /// Mean of the in-grid part.
  double mean() const {
    CompensatedSum s;
    for (std::size_t k = 0; k < masses_.size(); ++k) s += static_cast<double>(k) * step_ * masses_[k];
    return s.value();
  }

  /// CSV dump with columns k, x, mass, tail.
  void write_csv(std::ostream& os) const {
    os << "k,x,mass,tail\n";
    os.precision(17);
    for (std::size_t k = 0; k < masses_.size(); ++k) {
      os << k << ',' << static_cast<double>(k) * step_ << ',' << masses_[k] << ','
         << tail_at_index(static_cast<long>(k)) << '\n';
    }
  }

 private:
  void build_suffix() {
    suffix_.assign(masses_.size(), 0.0);
    CompensatedSum s;
    for (std::size_t k = masses_.size(); k-- > 0;) {
      suffix_[k] = s.value();
      s += masses_[k];
    }
    in_grid_total_ = s.value();
  }

  double step_;
  std::vector<double> masses_;
  double tail_beyond_;
  Rounding rounding_;
  std::vector<double> suffix_;  // suffix_[k] = sum_{j > k} masses_[j]
  double in_grid_total_ = 0.0;
};

/// Interval [lo, hi] from a LOWER/UPPER lattice pair.
struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

template <HeavyTailModel M>
LatticeDistribution discretize(const M& model, double step, double x_max, Rounding rounding) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("lattice.step", "must be > 0");
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw ConfigError("lattice.x_max", "must be > 0");
  const auto last = static_cast<std::size_t>(std::ceil(x_max / step - 1e-9));
  if (last == 0) throw ConfigError("lattice.x_max", "must be at least one step");
  std::vector<double> masses(last + 1, 0.0);
  // masses of ((j-1)h, jh] for j = 1..K
  for (std::size_t j = 1; j <= last; ++j) {
    const double left = static_cast<double>(j - 1) * step;
    const double m = model.local_mass(left, step);
    if (rounding == Rounding::Upper) {
      masses[j] = m;
    } else {
      masses[j - 1] = m;
    }
  }
  // models here carry no atom at 0: P(X = 0) = 1 - tail(0)
  const double atom0 = 1.0 - model.tail(0.0);
  masses[0] += atom0;
  const double beyond = model.tail(static_cast<double>(last) * step);
  if (beyond > 0.5) {
    throw NumericalError("discretize: tail beyond x_max is " + std::to_string(beyond) +
                         " (> 0.5); grid far too short");
  }
  return LatticeDistribution(step, std::move(masses), beyond, rounding);
}

inline void check_compatible(const LatticeDistribution& a, const LatticeDistribution& b) {
  if (a.size() != b.size() || a.rounding() != b.rounding() ||
      std::fabs(a.step() - b.step()) > 1e-12 * a.step())
    throw std::invalid_argument("lattices must share step, length and rounding");
}

/// Linear convolution truncated to the common grid. Products landing past
/// x_max, and anything involving tail_beyond, accumulate into tail_beyond.
inline LatticeDistribution convolve(const LatticeDistribution& a, const LatticeDistribution& b) {
  check_compatible(a, b);
  const std::size_t n = a.size();
  const auto am = a.masses();
  const auto bm = b.masses();
  std::vector<double> out(n, 0.0);
  const bool square = (&a == &b) || (am.data() == bm.data());
  if (square) {
    for (std::size_t k = 0; k < n; ++k) {
      // out_k = 2 sum_{j < k-j} a_j a_{k-j} + [k even] a_{k/2}^2
      const std::size_t half = (k + 1) / 2;  // j = 0..half-1 has j < k - j
      double s = 0.0;
      if (half > 0) {
        CompensatedSum acc;
        // pair a_j with a_{k-j}: reversed access, blockwise
        constexpr std::size_t kBlock = 256;
        double buf[kBlock];
        for (std::size_t j0 = 0; j0 < half; j0 += kBlock) {
          const std::size_t len = std::min(kBlock, half - j0);
          for (std::size_t i = 0; i < len; ++i) buf[i] = am[k - j0 - i];
          acc += detail::dot_block(am.data() + j0, buf, len);
        }
        s = 2.0 * acc.value();
      }
      if (k % 2 == 0) s += am[k / 2] * am[k / 2];
      out[k] = s;
    }
  } else {
    std::vector<double> rb(bm.rbegin(), bm.rend());  // rb[n-1-i] = b_i
    for (std::size_t k = 0; k < n; ++k) {
      // sum_{j=0..k} a_j b_{k-j} = sum_j a_j rb[n-1-k+j]
      out[k] = dot(am.data(), rb.data() + (n - 1 - k), k + 1);
    }
  }
  // in-grid pairs that land beyond the grid: sum_j a_j * (b mass above K-j)
  CompensatedSum spill;
  const long last = static_cast<long>(n - 1);
  for (std::size_t j = 1; j < n; ++j) spill += am[j] * b.grid_mass_above(last - static_cast<long>(j));
  const double ab = a.tail_beyond();
  const double bb = b.tail_beyond();
  const double beyond = ab + bb - ab * bb + spill.value();
  return LatticeDistribution(a.step(), std::move(out), beyond, a.rounding());
}

/// P(A + B > k*step) for independent lattice variables, in O(k) without
/// forming the convolution.
inline double convolution_tail_at_index(const LatticeDistribution& a, const LatticeDistribution& b, long k) {
  check_compatible(a, b);
  const auto am = a.masses();
  const long n = static_cast<long>(a.size());
  if (k > n - 1 && a.rounding() == Rounding::Lower) return 0.0;
  if (k >= n - 1) {
    // only reachable through the spill/beyond terms; fall back to convolution identity
    CompensatedSum spill;
    for (long j = 0; j < n; ++j) spill += am[static_cast<std::size_t>(j)] * b.grid_mass_above(n - 1 - j);
    const double ab = a.tail_beyond(), bb = b.tail_beyond();
    return ab + bb - ab * bb + spill.value();
  }
  // sum_{j <= k} a_j T_b(k - j) + (a mass above k) + a_beyond
  CompensatedSum s;
  constexpr long kBlock = 256;
  double buf[kBlock];
  for (long j0 = 0; j0 <= k; j0 += kBlock) {
    const long len = std::min(kBlock, k + 1 - j0);
    for (long i = 0; i < len; ++i) buf[i] = b.tail_at_index(k - j0 - i);
    s += detail::dot_block(am.data() + j0, buf, static_cast<std::size_t>(len));
  }
  s += a.grid_mass_above(k);
  s += a.tail_beyond();
  return s.value();
}

inline double convolution_tail(const LatticeDistribution& a, const LatticeDistribution& b, double x) {
  return convolution_tail_at_index(a, b, a.bracket_index(x));
}

/// F^{n*} on the base grid for n = 1..max_n.
class ConvolutionPowers {
 public:
  ConvolutionPowers(LatticeDistribution base, std::map<int, LatticeDistribution> powers, int max_n)
      : base_(std::move(base)), powers_(std::move(powers)), max_n_(max_n) {}

  const LatticeDistribution& base() const { return base_; }
  int max_n() const { return max_n_; }
  const LatticeDistribution& power(int n) const {
    auto it = powers_.find(n);
    if (it == powers_.end()) throw std::out_of_range("convolution power " + std::to_string(n) + " not computed");
    return it->second;
  }
  bool has(int n) const { return powers_.count(n) != 0; }

 private:
  LatticeDistribution base_;
  std::map<int, LatticeDistribution> powers_;
  int max_n_;
};

/// Default budget for grid length * max_n.
inline constexpr double kDefaultConvolutionBudget = 4.0e6;

/// Computes every power up to max_n. Even powers are squares of the half
/// power, odd powers add one copy of the base.
inline ConvolutionPowers convolve_powers(const LatticeDistribution& base, int max_n,
                                         double budget = kDefaultConvolutionBudget) {
  if (max_n < 1) throw ConfigError("max_n", "must be >= 1");
  if (static_cast<double>(base.size()) * max_n > budget) {
    throw ResourceError("convolve_powers: grid length " + std::to_string(base.size()) + " x max_n " +
                        std::to_string(max_n) + " exceeds budget " + std::to_string(budget));
  }
  std::map<int, LatticeDistribution> powers;
  powers.emplace(1, base);
  for (int n = 2; n <= max_n; ++n) {
    if (n % 2 == 0) {
      const auto& half = powers.at(n / 2);
      powers.emplace(n, convolve(half, half));
    } else {
      powers.emplace(n, convolve(powers.at(n - 1), base));
    }
  }
  return ConvolutionPowers(base, std::move(powers), max_n);
}

/// Compound distribution on the lattice with a rigorous bound on whatever
/// part of the n-series was dropped.
struct CompoundLattice {
  LatticeDistribution distribution;
  double remainder_bound = 0.0;  // sum_{n > n_max} p_n (0 for Panjer / finite support)
  long n_max = 0;                // series length (-1 for Panjer)
};

/// Truncated series sum_{n <= N_max} p_n F^{n*}. The dropped mass is added to
/// tail_beyond for UPPER lattices so the upper bracket stays an upper bound.
inline CompoundLattice compound_series(const LatticeDistribution& base, const CountModel& count,
                                       double kesten_eps = 0.5, double series_eps = 1e-12,
                                       double budget = 1e9) {
  if (!(count.pgf_radius() > 1.0)) throw ConfigError("count", "pgf radius of convergence must exceed 1");
  const double growth = std::min(1.0 + kesten_eps, 0.5 * (1.0 + count.pgf_radius()));
  const long n_max = series_truncation(count, growth, series_eps);
  const double remainder = count.weighted_remainder(n_max, 1.0);
  const std::size_t n = base.size();
  std::vector<CompensatedSum> acc(n);
  CompensatedSum beyond;
  acc[0] += count.pmf(0);
  if (n_max >= 1) {
    if (static_cast<double>(n) * static_cast<double>(n_max) > budget)
      throw ResourceError("compound_series: grid length x N_max exceeds budget");
    LatticeDistribution cur = base;
    for (long k = 1;; ++k) {
      const double p = count.pmf(k);
      if (p > 0.0) {
        const auto m = cur.masses();
        for (std::size_t i = 0; i < n; ++i) acc[i] += p * m[i];
        beyond += p * cur.tail_beyond();
      }
      if (k == n_max) break;
      cur = convolve(cur, base);
    }
  }
  if (base.rounding() == Rounding::Upper) beyond += remainder;
  std::vector<double> masses(n);
  for (std::size_t i = 0; i < n; ++i) masses[i] = acc[i].value();
  return {LatticeDistribution(base.step(), std::move(masses), beyond.value(), base.rounding()), remainder, n_max};
}

/// Panjer recursion for (a, b, 0) subordinators on a (possibly defective)
/// lattice severity. Mass beyond the grid is recovered as 1 - (in-grid mass).
inline CompoundLattice panjer_recursion(const LatticeDistribution& base, const CountModel& count) {
  const auto coeffs = count.panjer();
  if (!coeffs) throw std::invalid_argument("panjer_recursion: count model is not in the (a, b, 0) class");
  const double a = coeffs->a;
  const double b = coeffs->b;
  const std::size_t n = base.size();
  const auto f = base.masses();
  std::vector<double> jf(n);
  for (std::size_t j = 0; j < n; ++j) jf[j] = static_cast<double>(j) * f[j];
  // g stored reversed so that sum_{j=1..k} f_j g_{k-j} is a forward dot product
  std::vector<double> rg(n, 0.0);  // rg[n-1-i] = g_i
  const double scale = 1.0 / (1.0 - a * f[0]);
  rg[n - 1] = count.pgf(f[0]);
  for (std::size_t k = 1; k < n; ++k) {
    // g_{k-j} for j = 1..k sits at rg[n-1-k+j]
    const double* window = rg.data() + (n - 1 - k);
    double s = 0.0;
    if (a != 0.0) s += a * dot(f.data() + 1, window + 1, k);
    if (b != 0.0) s += (b / static_cast<double>(k)) * dot(jf.data() + 1, window + 1, k);
    rg[n - 1 - k] = scale * s;
  }
  std::vector<double> g(rg.rbegin(), rg.rend());
  const double in_grid = compensated_sum(g);
  const double beyond = std::max(0.0, 1.0 - in_grid);
  return {LatticeDistribution(base.step(), std::move(g), beyond, base.rounding()), 0.0, -1};
}

/// Compound distribution by the method the count model admits: Panjer for
/// the (a, b, 0) families, truncated series otherwise.
inline CompoundLattice compound_distribution(const LatticeDistribution& base, const CountModel& count,
                                             double kesten_eps = 0.5) {
  if (!(count.pgf_radius() > 1.0)) throw ConfigError("count", "pgf radius of convergence must exceed 1");
  if (count.panjer()) return panjer_recursion(base, count);
  return compound_series(base, count, kesten_eps);
}

/// Tail of the compound law at each x in x_grid, checked against the series
/// truncation remainder.
inline std::vector<double> compound_tail(const LatticeDistribution& base, const CountModel& count,
                                         std::span<const double> x_grid, double kesten_eps = 0.5) {
  const CompoundLattice c = compound_distribution(base, count, kesten_eps);
  std::vector<double> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    const double v = c.distribution.tail(x);
    if (c.remainder_bound > 1e-3 * v && v > 0.0)
      throw NumericalError("compound_tail: truncation remainder exceeds 1e-3 of the value at x = " +
                           std::to_string(x));
    out.push_back(v);
  }
  return out;
}

/// Grid points rounded to the nearest multiple of `step`, duplicates
/// dropped. On lattice points the UPPER/LOWER bracket is one cell wide.
inline std::vector<double> snap_to_lattice(std::span<const double> x_grid, double step) {
  std::vector<double> xs;
  for (double x : x_grid) {
    const double snapped = std::round(x / step) * step;
    if (xs.empty() || snapped > xs.back()) xs.push_back(snapped);
  }
  return xs;
}

/// UPPER/LOWER lattice pair for one model.
struct LatticePair {
  LatticeDistribution upper;
  LatticeDistribution lower;

  Bracket tail(double x) const { return {lower.tail(x), upper.tail(x)}; }
};

template <HeavyTailModel M>
LatticePair discretize_pair(const M& model, double step, double x_max) {
  return {discretize(model, step, x_max, Rounding::Upper), discretize(model, step, x_max, Rounding::Lower)};
}

}  // namespace subexp
