#pragma once

// Heavy-tailed severity models on [0, inf). Every model is an immutable value
// type exposing its survival function in survival form, interval masses
// F(x, x+t], the mean, and an inverse-survival sampler.

#include <cmath>
#include <concepts>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "subexp/errors.hpp"
#include "subexp/quadrature.hpp"

namespace subexp {

template <class M>
concept HeavyTailModel = requires(const M& m, double x, double t) {
  { m.tail(x) } -> std::convertible_to<double>;
  { m.local_mass(x, t) } -> std::convertible_to<double>;
  { m.mean() } -> std::convertible_to<double>;
  { m.support_min() } -> std::convertible_to<double>;
  { m.has_density() } -> std::convertible_to<bool>;
  { m.label() } -> std::convertible_to<std::string>;
  { m.sample(x) } -> std::convertible_to<double>;
  { m.breakpoints(x, t) } -> std::convertible_to<std::vector<double>>;
};

namespace detail {

inline void check_x(double x) {
  if (!(x >= 0.0)) throw std::domain_error("tail evaluated at negative or NaN x");
}

inline void check_t(double t) {
  if (!(t > 0.0)) throw std::domain_error("interval length t must be > 0");
}

inline void check_u(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("sampler requires u in (0, 1)");
}

// 1 - (1 + t/x)^(-alpha), accurate for t << x.
inline double power_decrement(double x, double t, double alpha) {
  return -std::expm1(-alpha * std::log1p(t / x));
}

inline std::string fmt_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Pareto tail c x^-alpha, capped at 1 below x0 = c^(1/alpha).
class ParetoModel {
 public:
  ParetoModel(double c, double alpha) : c_(c), alpha_(alpha) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("model.c", "must be > 0");
    if (!(alpha > 1.0) || !std::isfinite(alpha))
      throw ConfigError("model.alpha", "must be > 1 (finite mean required), got " + detail::fmt_param(alpha));
    x0_ = std::pow(c, 1.0 / alpha);
  }

  double c() const { return c_; }
  double alpha() const { return alpha_; }
  double x0() const { return x0_; }

  double tail(double x) const {
    detail::check_x(x);
    return x <= x0_ ? 1.0 : c_ * std::pow(x, -alpha_);
  }

  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    const double y = x + t;
    if (y <= x0_) return 0.0;
    if (x < x0_) return -std::expm1(-alpha_ * std::log(y / x0_));
    return tail(x) * detail::power_decrement(x, t, alpha_);
  }

  double mean() const { return x0_ * alpha_ / (alpha_ - 1.0); }
  double support_min() const { return x0_; }
  bool has_density() const { return true; }
  std::string label() const {
    return "pareto(c=" + detail::fmt_param(c_) + ",alpha=" + detail::fmt_param(alpha_) + ")";
  }

  double sample(double u) const {
    detail::check_u(u);
    return std::pow(c_ / u, 1.0 / alpha_);
  }

  std::vector<double> breakpoints(double a, double b) const {
    if (x0_ > a && x0_ < b) return {x0_};
    return {};
  }

 private:
  double c_;
  double alpha_;
  double x0_ = 1.0;
};

/// Lognormal with log-location mu_log and log-scale sigma. Tails go through
/// erfc so relative accuracy survives deep into the tail.
class LognormalModel {
 public:
  LognormalModel(double mu_log, double sigma) : mu_log_(mu_log), sigma_(sigma) {
    if (!std::isfinite(mu_log)) throw ConfigError("model.mu_log", "must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("model.sigma", "must be > 0");
  }

  double mu_log() const { return mu_log_; }
  double sigma() const { return sigma_; }

  double tail(double x) const {
    detail::check_x(x);
    if (x == 0.0) return 1.0;
    return 0.5 * std::erfc(z(x) / std::sqrt(2.0));
  }

  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    const double z2 = z(x + t);
    if (x == 0.0) return 0.5 * std::erfc(-z2 / std::sqrt(2.0));
    const double z1 = z(x);
    if (z1 >= 0.0) {
      return 0.5 * (std::erfc(z1 / std::sqrt(2.0)) - std::erfc(z2 / std::sqrt(2.0)));
    }
    return 0.5 * (std::erfc(-z2 / std::sqrt(2.0)) - std::erfc(-z1 / std::sqrt(2.0)));
  }

  double mean() const { return std::exp(mu_log_ + 0.5 * sigma_ * sigma_); }
  double support_min() const { return 0.0; }
  bool has_density() const { return true; }
  std::string label() const {
    return "lognormal(mu_log=" + detail::fmt_param(mu_log_) + ",sigma=" + detail::fmt_param(sigma_) + ")";
  }

  double sample(double u) const {
    detail::check_u(u);
    const double zq = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
    return std::exp(mu_log_ + sigma_ * zq);
  }

  std::vector<double> breakpoints(double, double) const { return {}; }

 private:
  double z(double x) const { return (std::log(x) - mu_log_) / sigma_; }

  double mu_log_;
  double sigma_;
};

/// Weibull tail exp(-x^beta) with shape beta in (0, 1).
class WeibullModel {
 public:
  explicit WeibullModel(double beta) : beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("model.beta", "must lie in (0, 1), got " + detail::fmt_param(beta));
  }

  double beta() const { return beta_; }

  double tail(double x) const {
    detail::check_x(x);
    return std::exp(-std::pow(x, beta_));
  }

  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    if (x == 0.0) return -std::expm1(-std::pow(t, beta_));
    // (x+t)^beta - x^beta without cancellation
    const double gap = std::pow(x, beta_) * std::expm1(beta_ * std::log1p(t / x));
    return tail(x) * -std::expm1(-gap);
  }

  double mean() const { return std::tgamma(1.0 + 1.0 / beta_); }
  double support_min() const { return 0.0; }
  bool has_density() const { return true; }
  std::string label() const { return "weibull(beta=" + detail::fmt_param(beta_) + ")"; }

  double sample(double u) const {
    detail::check_u(u);
    return std::pow(-std::log(u), 1.0 / beta_);
  }

  std::vector<double> breakpoints(double, double) const { return {}; }

 private:
  double beta_;
};

/// Pareto-like tail with jumps: c(1 + 1/n) x^-alpha on [n^beta, (n+1)^beta)
/// for n >= 2. Below 2^beta the n = 2 formula is extended down to s0, where it
/// reaches 1, and the tail is 1 on [0, s0).
class PiecewiseParetoModel {
 public:
  PiecewiseParetoModel(double c, double alpha, double beta) : c_(c), alpha_(alpha), beta_(beta) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("model.c", "must be > 0");
    if (!(alpha > 1.0) || !std::isfinite(alpha))
      throw ConfigError("model.alpha", "must be > 1 (finite mean required), got " + detail::fmt_param(alpha));
    if (!(beta > 1.0 && beta < 2.0)) throw ConfigError("model.beta", "must lie in (1, 2), got " + detail::fmt_param(beta));
    s0_ = std::pow(1.5 * c, 1.0 / alpha);
    if (s0_ > std::pow(2.0, beta))
      throw ConfigError("model.c", "switch point s0 = (1.5c)^(1/alpha) exceeds 2^beta; tail would not be monotone");
  }

  double c() const { return c_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double s0() const { return s0_; }

  /// Segment index n with n^beta <= x < (n+1)^beta; 2 for x below 3^beta.
  long segment(double x) const {
    if (x < boundary(3)) return 2;
    long n = static_cast<long>(std::floor(std::pow(x, 1.0 / beta_)));
    while (n > 2 && boundary(n) > x) --n;
    while (boundary(n + 1) <= x) ++n;
    return n;
  }

  static double boundary_of(long n, double beta) { return std::pow(static_cast<double>(n), beta); }
  double boundary(long n) const { return boundary_of(n, beta_); }

  double tail(double x) const {
    detail::check_x(x);
    if (x < s0_) return 1.0;
    const long n = segment(x);
    return c_ * (1.0 + 1.0 / static_cast<double>(n)) * std::pow(x, -alpha_);
  }

  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    if (x >= s0_) {
      const long n = segment(x);
      if (x + t < boundary(n + 1)) return tail(x) * detail::power_decrement(x, t, alpha_);
    }
    return tail(x) - tail(x + t);
  }

  /// Closed form: s0 plus the segment integrals, summed until the terms
  /// vanish in double precision.
  double mean() const {
    const double p = 1.0 - alpha_;
    const double k = c_ / (alpha_ - 1.0);
    // first part: s0 + n=2 formula on [s0, 3^beta)
    double total = s0_ + 1.5 * k * (std::pow(s0_, p) - std::pow(boundary(3), p));
    // sum_{n>=3} c(1+1/n) int_{n^beta}^{(n+1)^beta} x^-alpha dx
    //   = k * [3^(beta p) + sum_{n>=3} (n^(beta p) - (n+1)^(beta p)) / n]
    double series = 0.0;
    double prev = std::pow(boundary(3), p);
    for (long n = 3;; ++n) {
      const double next = std::pow(boundary(n + 1), p);
      const double term = (prev - next) / static_cast<double>(n);
      series += term;
      prev = next;
      if (term < 1e-19 * series) break;
      if (n > 50'000'000) break;
    }
    total += k * (std::pow(boundary(3), p) + series);
    return total;
  }

  double support_min() const { return s0_; }
  bool has_density() const { return false; }
  std::string label() const {
    return "piecewise_pareto(c=" + detail::fmt_param(c_) + ",alpha=" + detail::fmt_param(alpha_) +
           ",beta=" + detail::fmt_param(beta_) + ")";
  }

  /// Inverse survival x = inf{y : tail(y) <= u}. A u falling inside a jump of
  /// the tail maps to the jump location.
  double sample(double u) const {
    detail::check_u(u);
    // smallest n >= 2 whose successor segment starts at or below u
    auto start_value = [&](long n) {
      return c_ * (1.0 + 1.0 / static_cast<double>(n)) * std::pow(boundary(n), -alpha_);
    };
    long lo = 2, hi = 3;
    while (start_value(hi + 1) > u) {
      lo = hi;
      hi *= 2;
    }
    // start_value(hi + 1) <= u; find the smallest n in [lo, hi] with start_value(n + 1) <= u
    while (lo < hi) {
      const long mid = lo + (hi - lo) / 2;
      if (start_value(mid + 1) <= u) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    const long n = lo;
    const double x = std::pow(c_ * (1.0 + 1.0 / static_cast<double>(n)) / u, 1.0 / alpha_);
    const double right = boundary(n + 1);
    if (x >= right) return right;
    return std::max(x, s0_);
  }

  std::vector<double> breakpoints(double a, double b) const {
    std::vector<double> out;
    if (s0_ > a && s0_ < b) out.push_back(s0_);
    long n = std::max<long>(3, static_cast<long>(std::floor(std::pow(std::max(a, 0.0), 1.0 / beta_))));
    for (;; ++n) {
      const double p = boundary(n);
      if (p >= b) break;
      if (p > a) out.push_back(p);
    }
    return out;
  }

 private:
  double c_;
  double alpha_;
  double beta_;
  double s0_ = 1.0;
};

/// Unit mass at a point `at > 0`. Not heavy-tailed; used as a negative
/// control for the class diagnostics.
class PointMassModel {
 public:
  explicit PointMassModel(double at) : at_(at) {
    if (!(at > 0.0) || !std::isfinite(at)) throw ConfigError("model.at", "must be > 0");
  }

  double at() const { return at_; }
  double tail(double x) const {
    detail::check_x(x);
    return x < at_ ? 1.0 : 0.0;
  }
  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    return (x < at_ && at_ <= x + t) ? 1.0 : 0.0;
  }
  double mean() const { return at_; }
  double support_min() const { return at_; }
  bool has_density() const { return false; }
  std::string label() const { return "point_mass(at=" + detail::fmt_param(at_) + ")"; }
  double sample(double u) const {
    detail::check_u(u);
    return at_;
  }
  std::vector<double> breakpoints(double a, double b) const {
    if (at_ > a && at_ < b) return {at_};
    return {};
  }

 private:
  double at_;
};

/// Runtime-selected model (config files, CLI). Satisfies HeavyTailModel.
class Model {
 public:
  using Variant = std::variant<ParetoModel, LognormalModel, WeibullModel, PiecewiseParetoModel, PointMassModel>;

  template <class M>
    requires HeavyTailModel<M> && std::constructible_from<Variant, M>
  Model(M m) : v_(std::move(m)) {}  // NOLINT(google-explicit-constructor)

  double tail(double x) const {
    return std::visit([x](const auto& m) { return m.tail(x); }, v_);
  }
  double local_mass(double x, double t) const {
    return std::visit([x, t](const auto& m) { return m.local_mass(x, t); }, v_);
  }
  double mean() const {
    return std::visit([](const auto& m) { return m.mean(); }, v_);
  }
  double support_min() const {
    return std::visit([](const auto& m) { return m.support_min(); }, v_);
  }
  bool has_density() const {
    return std::visit([](const auto& m) { return m.has_density(); }, v_);
  }
  std::string label() const {
    return std::visit([](const auto& m) { return m.label(); }, v_);
  }
  double sample(double u) const {
    return std::visit([u](const auto& m) { return m.sample(u); }, v_);
  }
  std::vector<double> breakpoints(double a, double b) const {
    return std::visit([a, b](const auto& m) { return m.breakpoints(a, b); }, v_);
  }

  const Variant& variant() const { return v_; }

 private:
  Variant v_;
};

static_assert(HeavyTailModel<ParetoModel>);
static_assert(HeavyTailModel<LognormalModel>);
static_assert(HeavyTailModel<WeibullModel>);
static_assert(HeavyTailModel<PiecewiseParetoModel>);
static_assert(HeavyTailModel<PointMassModel>);
static_assert(HeavyTailModel<Model>);

template <HeavyTailModel M>
double eval_tail(const M& model, double x) {
  return model.tail(x);
}

template <HeavyTailModel M>
double eval_local_mass(const M& model, double x, double t) {
  return model.local_mass(x, t);
}

template <HeavyTailModel M>
double eval_mean(const M& model) {
  const double mu = model.mean();
  if (!std::isfinite(mu)) throw ConfigError("model", "infinite mean");
  return mu;
}

/// Mean recomputed as the integral of the tail over [0, inf). Jumps listed by
/// the model are integrated piecewise up to `jump_horizon`; beyond that the
/// remainder goes through a double-exponential rule.
template <HeavyTailModel M>
QuadratureResult numerical_mean(const M& model, double jump_horizon = 1e6) {
  const auto tail = [&](double x) { return model.tail(x); };
  const double lead = model.support_min();
  QuadratureResult head = integrate(tail, 0.0, lead > 0.0 ? lead : 0.0, model.breakpoints(0.0, lead));
  auto jumps = model.breakpoints(lead, jump_horizon);
  double start = lead;
  if (!jumps.empty()) {
    start = jumps.back();
    QuadratureResult mid = integrate(tail, lead, start, jumps);
    head.value += mid.value;
    head.error += mid.error;
  }
  const QuadratureResult rest = integrate_to_infinity(tail, start);
  head.value += rest.value;
  head.error += rest.error;
  return head;
}

}  // namespace subexp
