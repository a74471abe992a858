#pragma once

// Subordinators {p_n}: the distribution of the number of summands N.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "subexp/errors.hpp"
#include "subexp/numeric.hpp"

namespace subexp {

struct FactorialMoments {
  double m1 = 0.0;   // sum n p_n
  double m2f = 0.0;  // sum n(n-1) p_n
};

/// (a, b) of the Panjer class p_n = (a + b/n) p_{n-1}.
struct PanjerCoefficients {
  double a = 0.0;
  double b = 0.0;
};

class CountModel {
 public:
  struct Poisson {
    double lambda;
  };
  struct Geometric {
    double rho;  // p_n = (1 - rho) rho^n
  };
  struct NegativeBinomial {
    double r;
    double rho;  // p_n = C(n+r-1, n) (1 - rho)^r rho^n
  };
  struct Deterministic {
    long n0;
  };
  struct FiniteSupport {
    std::vector<std::pair<long, double>> atoms;
  };
  using Family = std::variant<Poisson, Geometric, NegativeBinomial, Deterministic, FiniteSupport>;

  static CountModel poisson(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("count.lambda", "must be > 0");
    return CountModel(Poisson{lambda});
  }
  static CountModel geometric(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("count.rho", "must lie in (0, 1)");
    return CountModel(Geometric{rho});
  }
  static CountModel negative_binomial(double r, double rho) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("count.r", "must be > 0");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("count.rho", "must lie in (0, 1)");
    return CountModel(NegativeBinomial{r, rho});
  }
  static CountModel deterministic(long n0) {
    if (n0 < 0) throw ConfigError("count.n", "must be >= 0");
    return CountModel(Deterministic{n0});
  }
  static CountModel finite_support(std::vector<std::pair<long, double>> atoms) {
    if (atoms.empty()) throw ConfigError("count.atoms", "must not be empty");
    std::sort(atoms.begin(), atoms.end());
    CompensatedSum total;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (atoms[i].first < 0) throw ConfigError("count.atoms", "support points must be >= 0");
      if (i > 0 && atoms[i].first == atoms[i - 1].first) throw ConfigError("count.atoms", "duplicate support point");
      if (!(atoms[i].second >= 0.0)) throw ConfigError("count.atoms", "probabilities must be >= 0");
      total += atoms[i].second;
    }
    if (std::fabs(total.value() - 1.0) > 1e-12) throw ConfigError("count.atoms", "probabilities must sum to 1");
    return CountModel(FiniteSupport{std::move(atoms)});
  }

  const Family& family() const { return family_; }

  std::string label() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Poisson>) {
            return "poisson(lambda=" + num(f.lambda) + ")";
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return "geometric(rho=" + num(f.rho) + ")";
          } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
            return "negative_binomial(r=" + num(f.r) + ",rho=" + num(f.rho) + ")";
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return "deterministic(n=" + std::to_string(f.n0) + ")";
          } else {
            return "finite_support(" + std::to_string(f.atoms.size()) + " atoms)";
          }
        },
        family_);
  }

  double pmf(long n) const {
    if (n < 0) return 0.0;
    return std::visit(
        [n](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          const double dn = static_cast<double>(n);
          if constexpr (std::is_same_v<T, Poisson>) {
            return std::exp(dn * std::log(f.lambda) - f.lambda - std::lgamma(dn + 1.0));
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return (1.0 - f.rho) * std::pow(f.rho, dn);
          } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
            const double log_choose = std::lgamma(dn + f.r) - std::lgamma(f.r) - std::lgamma(dn + 1.0);
            return std::exp(log_choose + f.r * std::log1p(-f.rho) + dn * std::log(f.rho));
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return n == f.n0 ? 1.0 : 0.0;
          } else {
            for (const auto& [k, p] : f.atoms)
              if (k == n) return p;
            return 0.0;
          }
        },
        family_);
  }

  /// Closed-form factorial moments.
  FactorialMoments moments() const {
    return std::visit(
        [](const auto& f) -> FactorialMoments {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Poisson>) {
            return {f.lambda, f.lambda * f.lambda};
          } else if constexpr (std::is_same_v<T, Geometric>) {
            const double q = f.rho / (1.0 - f.rho);
            return {q, 2.0 * q * q};
          } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
            const double q = f.rho / (1.0 - f.rho);
            return {f.r * q, f.r * (f.r + 1.0) * q * q};
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            const double d = static_cast<double>(f.n0);
            return {d, d * (d - 1.0)};
          } else {
            CompensatedSum s1, s2;
            for (const auto& [k, p] : f.atoms) {
              const double d = static_cast<double>(k);
              s1 += d * p;
              s2 += d * (d - 1.0) * p;
            }
            return {s1.value(), s2.value()};
          }
        },
        family_);
  }

  /// Radius of convergence of E z^N, stored analytically per family.
  double pgf_radius() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Geometric> || std::is_same_v<T, NegativeBinomial>) {
            return 1.0 / f.rho;
          } else {
            return std::numeric_limits<double>::infinity();
          }
        },
        family_);
  }

  /// E z^N for 0 <= z < pgf_radius.
  double pgf(double z) const {
    return std::visit(
        [z](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Poisson>) {
            return std::exp(f.lambda * (z - 1.0));
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return (1.0 - f.rho) / (1.0 - f.rho * z);
          } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
            return std::pow((1.0 - f.rho) / (1.0 - f.rho * z), f.r);
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return std::pow(z, static_cast<double>(f.n0));
          } else {
            CompensatedSum s;
            for (const auto& [k, p] : f.atoms) s += p * std::pow(z, static_cast<double>(k));
            return s.value();
          }
        },
        family_);
  }

  std::optional<PanjerCoefficients> panjer() const {
    return std::visit(
        [](const auto& f) -> std::optional<PanjerCoefficients> {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Poisson>) {
            return PanjerCoefficients{0.0, f.lambda};
          } else if constexpr (std::is_same_v<T, Geometric>) {
            return PanjerCoefficients{f.rho, 0.0};
          } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
            return PanjerCoefficients{f.rho, (f.r - 1.0) * f.rho};
          } else {
            return std::nullopt;
          }
        },
        family_);
  }

  /// Largest n with p_n > 0, if the support is finite.
  std::optional<long> max_support() const {
    if (const auto* d = std::get_if<Deterministic>(&family_)) return d->n0;
    if (const auto* fs = std::get_if<FiniteSupport>(&family_)) return fs->atoms.back().first;
    return std::nullopt;
  }

  /// sum_{n > n_max} p_n growth^n, by direct summation of the remaining
  /// series (terms are summed until they stop contributing).
  double weighted_remainder(long n_max, double growth) const {
    if (auto top = max_support()) {
      CompensatedSum s;
      for (long n = n_max + 1; n <= *top; ++n) s += pmf(n) * std::pow(growth, static_cast<double>(n));
      return s.value();
    }
    CompensatedSum s;
    double peak = 0.0;
    for (long n = n_max + 1;; ++n) {
      const double term = pmf(n) * std::pow(growth, static_cast<double>(n));
      s += term;
      peak = std::max(peak, term);
      // past the mode the terms decay at least geometrically
      if (term < 1e-18 * s.value() && term < peak * 1e-3) break;
      if (term == 0.0 && n > n_max + 1000) break;
      if (n - n_max > 10'000'000) break;
    }
    return s.value();
  }

 private:
  explicit CountModel(Family f) : family_(std::move(f)) {}

  static std::string num(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  Family family_;
};

/// (m1, m2f); rejects subordinators whose pgf is not analytic at 1.
inline FactorialMoments factorial_moments(const CountModel& count) {
  if (!(count.pgf_radius() > 1.0)) throw ConfigError("count", "pgf radius of convergence must exceed 1");
  return count.moments();
}

/// Smallest N_max with sum_{n > N_max} p_n growth^n < eps.
inline long series_truncation(const CountModel& count, double growth, double eps) {
  if (!(growth >= 1.0)) throw ConfigError("growth", "must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("eps", "must be > 0");
  if (!(growth < count.pgf_radius()))
    throw ConfigError("growth", "must be below the pgf radius of convergence (series diverges)");
  if (auto top = count.max_support()) {
    // walk down from the top of the support
    long n = *top;
    double rem = 0.0;
    while (n > 0) {
      const double next = rem + count.pmf(n) * std::pow(growth, static_cast<double>(n));
      if (!(next < eps)) break;
      rem = next;
      --n;
    }
    return n;
  }
  // Remainders are nonincreasing in N_max, so bracket then bisect.
  long lo = 0;
  if (count.weighted_remainder(lo, growth) < eps) return 0;
  long hi = 1;
  while (!(count.weighted_remainder(hi, growth) < eps)) {
    lo = hi;
    hi *= 2;
    if (hi > (1L << 40)) throw NumericalError("series_truncation: no N_max found");
  }
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (count.weighted_remainder(mid, growth) < eps) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace subexp
