#pragma once

// Closed-form tail approximants: first- and second-order compound tails,
// n-fold expansions, and the tail-equivalent law with density K F(x, x+1].

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subexp/counts.hpp"
#include "subexp/curves.hpp"
#include "subexp/errors.hpp"
#include "subexp/lattice.hpp"
#include "subexp/models.hpp"
#include "subexp/quadrature.hpp"

namespace subexp {

/// m1 * F(x, inf).
template <HeavyTailModel M>
double first_order_tail(const M& model, const CountModel& count, double x) {
  const auto mom = factorial_moments(count);
  if (mom.m1 == 0.0) return 0.0;
  return mom.m1 * model.tail(x);
}

/// Second-order correction mu * m2f * F(x, x+1].
template <HeavyTailModel M>
double second_order_correction(const M& model, const CountModel& count, double x) {
  const auto mom = factorial_moments(count);
  if (mom.m2f == 0.0) return 0.0;
  return eval_mean(model) * mom.m2f * model.local_mass(x, 1.0);
}

template <HeavyTailModel M>
double second_order_tail(const M& model, const CountModel& count, double x) {
  return first_order_tail(model, count, x) + second_order_correction(model, count, x);
}

/// n F(x, inf) + n(n-1) mu F(x, x+1], the expansion of the n-fold tail.
template <HeavyTailModel M>
double nfold_expansion(const M& model, int n, double x) {
  if (n < 2) throw ConfigError("n", "n-fold expansion needs n >= 2");
  const double dn = static_cast<double>(n);
  return dn * model.tail(x) + dn * (dn - 1.0) * eval_mean(model) * model.local_mass(x, 1.0);
}

struct ApproximationRow {
  double x = 0.0;
  double exact_lo = 0.0;
  double exact_hi = 0.0;
  double first_order = 0.0;
  double second_order = 0.0;
  double residual_ratio = 0.0;  // (exact_mid - first_order) / F(x, x+1]
  double residual_lo = 0.0;
  double residual_hi = 0.0;
  bool flagged = false;  // bracket wider than half the numerator
};

struct ApproximationReport {
  std::string model_label;
  std::string count_label;
  double step = 0.0;
  double mean = 0.0;
  FactorialMoments moments;
  std::vector<ApproximationRow> rows;
  RatioCurve residual_curve;  // target mu * m2f

  double target() const { return mean * moments.m2f; }
};

/// Fraction of the numerator the bracket may span before a point is
/// excluded from verdicts.
inline constexpr double kCancellationLimit = 0.5;

/// Compares the lattice compound tail (bracketed by the UPPER/LOWER pair)
/// against the first- and second-order approximants on x_grid.
template <HeavyTailModel M>
ApproximationReport approximate(const M& model, const CountModel& count, const LatticeDistribution& upper,
                                const LatticeDistribution* lower, std::span<const double> x_grid,
                                VerdictRule rule = {}, double kesten_eps = 0.5) {
  ApproximationReport rep;
  rep.model_label = model.label();
  rep.count_label = count.label();
  rep.step = upper.step();
  rep.mean = eval_mean(model);
  rep.moments = factorial_moments(count);

  const auto hi_vals = compound_tail(upper, count, x_grid, kesten_eps);
  const auto lo_vals = lower ? compound_tail(*lower, count, x_grid, kesten_eps) : hi_vals;

  rep.residual_curve.name = "compound_residual";
  rep.residual_curve.rule = rule;
  const double target = rep.target();
  rep.residual_curve.target = target != 0.0 ? Target::of(target) : Target::zero();

  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    ApproximationRow row;
    row.x = x_grid[i];
    row.exact_lo = std::min(lo_vals[i], hi_vals[i]);
    row.exact_hi = std::max(lo_vals[i], hi_vals[i]);
    row.first_order = first_order_tail(model, count, row.x);
    row.second_order = second_order_tail(model, count, row.x);
    const double loc = model.local_mass(row.x, 1.0);
    CurvePoint pt;
    pt.x = row.x;
    if (loc > 0.0) {
      const double mid = 0.5 * (row.exact_lo + row.exact_hi);
      const double num = mid - row.first_order;
      row.residual_ratio = num / loc;
      row.residual_lo = (row.exact_lo - row.first_order) / loc;
      row.residual_hi = (row.exact_hi - row.first_order) / loc;
      // a zero target has no numerator scale; the bracket must resolve the tolerance instead
      row.flagged = target != 0.0 ? (row.exact_hi - row.exact_lo) > kCancellationLimit * std::fabs(num)
                                  : (row.residual_hi - row.residual_lo) > rule.tolerance;
      pt.value = row.residual_ratio;
      pt.lo = row.residual_lo;
      pt.hi = row.residual_hi;
      pt.flagged = row.flagged;
    } else {
      row.residual_ratio = row.residual_lo = row.residual_hi = std::numeric_limits<double>::quiet_NaN();
      pt.defined = false;
    }
    rep.rows.push_back(row);
    rep.residual_curve.points.push_back(pt);
  }
  evaluate_verdict(rep.residual_curve);
  return rep;
}

/// The law H with density K F(x, x+1], K = 1 / int_0^1 F(s, inf) ds. Its
/// tail is K int_x^{x+1} F(s, inf) ds and differs from K F(x, inf) by
/// -K int_0^1 F(x, x+z] dz.
template <HeavyTailModel M>
class EquivalentTailModel {
 public:
  static constexpr double kMaxRelativeError = 1e-10;

  explicit EquivalentTailModel(M source) : source_(std::move(source)) {
    const auto r = checked(integrate([this](double s) { return source_.tail(s); }, 0.0, 1.0,
                                     with_dyadic_breaks(source_.breakpoints(0.0, 1.0), 0.0, 1.0)),
                           "normalizing constant");
    norm_ = 1.0 / r;
  }

  const M& source() const { return source_; }
  double K() const { return norm_; }

  double density(double x) const { return norm_ * source_.local_mass(x, 1.0); }

  /// H(x, inf)
  double tail(double x) const {
    detail::check_x(x);
    return norm_ * checked(integrate([this](double s) { return source_.tail(s); }, x, x + 1.0,
                                     with_dyadic_breaks(source_.breakpoints(x, x + 1.0), x, x + 1.0)),
                           "tail");
  }

  /// H(x, inf) - K F(x, inf), integrated without cancellation.
  double tail_excess(double x) const {
    detail::check_x(x);
    const auto lm = [this, x](double z) { return z > 0.0 ? source_.local_mass(x, z) : 0.0; };
    std::vector<double> breaks;
    for (double b : source_.breakpoints(x, x + 1.0)) breaks.push_back(b - x);
    return -norm_ * checked(integrate(lm, 0.0, 1.0, breaks), "tail excess");
  }

  /// H(x, x+t] = int_x^{x+t} density.
  double local_mass(double x, double t) const {
    detail::check_x(x);
    detail::check_t(t);
    return checked(integrate([this](double s) { return density(s); }, x, x + t, density_breaks(x, x + t)),
                   "local mass");
  }

  /// Integral of the density over [a, b].
  QuadratureResult density_integral(double a, double b) const {
    std::vector<double> breaks = density_breaks(a, b);
    for (double p = 1.0; p < b; p *= 2.0)
      if (p > a) breaks.push_back(p);
    return integrate([this](double s) { return density(s); }, a, b, breaks);
  }

  /// Integral of the density over [0, inf): piecewise up to `split`, then a
  /// double-exponential rule.
  QuadratureResult total_mass(double split = 64.0) const {
    QuadratureResult head = density_integral(0.0, split);
    const auto rest = integrate_to_infinity([this](double s) { return density(s); }, split);
    head.value += rest.value;
    head.error += rest.error;
    return head;
  }

  /// Mean of H: K (mu - int_0^1 (1 - s) F(s, inf) ds).
  double mean() const {
    const auto inner = checked(integrate([this](double s) { return (1.0 - s) * source_.tail(s); }, 0.0, 1.0,
                                         with_dyadic_breaks(source_.breakpoints(0.0, 1.0), 0.0, 1.0)),
                               "mean");
    return norm_ * (source_.mean() - inner);
  }

 private:
  // Tails like exp(-x^beta) have unbounded derivatives at 0; splitting at
  // 2^-k keeps each panel smooth on its own scale.
  static std::vector<double> with_dyadic_breaks(std::vector<double> breaks, double a, double b) {
    for (double p = 0.5; p > 1e-12; p *= 0.5)
      if (p > a && p < b) breaks.push_back(p);
    return breaks;
  }

  std::vector<double> density_breaks(double a, double b) const {
    std::vector<double> out = with_dyadic_breaks({}, a, b);
    for (double p : source_.breakpoints(std::max(0.0, a - 1.0), b + 1.0)) {
      if (p > a && p < b) out.push_back(p);
      if (p - 1.0 > a && p - 1.0 < b) out.push_back(p - 1.0);
    }
    return out;
  }

  static double checked(const QuadratureResult& r, const char* what) {
    if (r.error > kMaxRelativeError * std::fabs(r.value) && r.error > 1e-300)
      throw NumericalError(std::string("equivalent tail: quadrature error bound too large for ") + what);
    return r.value;
  }

  M source_;
  double norm_ = 1.0;
};

template <HeavyTailModel M>
EquivalentTailModel<M> build_equivalent_tail(const M& model) {
  eval_mean(model);
  return EquivalentTailModel<M>(model);
}

}  // namespace subexp
