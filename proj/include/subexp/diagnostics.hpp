#pragma once

// Empirical class-membership checks: every limit ratio is sampled on a
// geometric x-grid, carried with its lattice bracket, and reduced to a
// verdict by the last-window rule in curves.hpp. Verdicts are numerical
// evidence, not proofs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subexp/asymptotics.hpp"
#include "subexp/curves.hpp"
#include "subexp/lattice.hpp"
#include "subexp/models.hpp"
#include "subexp/numeric.hpp"
#include "subexp/quadrature.hpp"

namespace subexp {

/// UPPER/LOWER convolution powers of one model. Powers up to `full_power`
/// are materialized; higher ones are evaluated pointwise by splitting
/// n = a + b over materialized powers, which costs O(grid) per tail value.
class BracketedPowers {
 public:
  BracketedPowers(LatticePair base, int full_power = 1, double budget = kDefaultConvolutionBudget)
      : upper_(convolve_powers(base.upper, full_power, budget)),
        lower_(convolve_powers(base.lower, full_power, budget)) {}

  template <HeavyTailModel M>
  static BracketedPowers build(const M& model, double step, double x_max, int full_power = 1,
                               double budget = kDefaultConvolutionBudget) {
    return BracketedPowers(discretize_pair(model, step, x_max), full_power, budget);
  }

  double step() const { return upper_.base().step(); }
  double x_max() const { return upper_.base().x_max(); }
  int full_power() const { return upper_.max_n(); }
  const ConvolutionPowers& upper() const { return upper_; }
  const ConvolutionPowers& lower() const { return lower_; }

  /// Bracket of F^{n*}(x, inf). x is taken on the grid (rounded outward
  /// otherwise).
  Bracket tail(int n, double x) const {
    if (n < 1) throw std::invalid_argument("power must be >= 1");
    return {power_tail(lower_, n, x), power_tail(upper_, n, x)};
  }

 private:
  static double power_tail(const ConvolutionPowers& p, int n, double x) {
    if (n <= p.max_n()) return p.power(n).tail(x);
    const int a = std::min(p.max_n(), n - 1);
    const int b = n - a;
    if (b > p.max_n()) throw std::out_of_range("power " + std::to_string(n) + " needs more materialized powers");
    return convolution_tail(p.power(a), p.power(b), x);
  }

  ConvolutionPowers upper_;
  ConvolutionPowers lower_;
};

namespace detail {

inline CurvePoint undefined_point(double x) {
  CurvePoint p;
  p.x = x;
  p.defined = false;
  return p;
}

inline CurvePoint ratio_point(double x, Bracket num, double den) {
  if (!(den > 0.0) || !std::isfinite(den) || den < std::numeric_limits<double>::min()) return undefined_point(x);
  CurvePoint p;
  p.x = x;
  p.lo = num.lo / den;
  p.hi = num.hi / den;
  p.value = num.mid() / den;
  return p;
}

}  // namespace detail

/// F^{2*}(x, inf) / F(x, inf); limit 2 for subexponential F.
template <HeavyTailModel M>
CurvePoint subexp_ratio(const BracketedPowers& powers, const M& model, double x) {
  return detail::ratio_point(x, powers.tail(2, x), model.tail(x));
}

/// F^{2*}(x, x+t] / F(x, x+t]; limit 2 in the local class.
template <HeavyTailModel M>
CurvePoint local_subexp_ratio(const BracketedPowers& powers, const M& model, double x, double t) {
  if (x + t > powers.x_max() * (1.0 + 1e-12)) return detail::undefined_point(x);
  const Bracket a = powers.tail(2, x);
  const Bracket b = powers.tail(2, x + t);
  Bracket num{std::max(0.0, a.lo - b.hi), a.hi - b.lo};
  CurvePoint p = detail::ratio_point(x, num, model.local_mass(x, t));
  if (p.defined) p.value = (a.mid() - b.mid()) / model.local_mass(x, t);
  return p;
}

/// (F^{n*}(x, inf) - n F(x, inf)) / F(x, x+1]; limit n(n-1) mu. The closed
/// form n F(x, inf) is subtracted from the lattice bracket; points where the
/// bracket is wider than half the numerator are flagged.
template <HeavyTailModel M>
CurvePoint nfold_ratio(const BracketedPowers& powers, const M& model, int n, double x) {
  const Bracket t = powers.tail(n, x);
  const double base = static_cast<double>(n) * model.tail(x);
  const Bracket num{t.lo - base, t.hi - base};
  CurvePoint p = detail::ratio_point(x, num, model.local_mass(x, 1.0));
  if (p.defined) p.flagged = num.width() > kCancellationLimit * std::fabs(num.mid());
  return p;
}

template <HeavyTailModel M>
CurvePoint second_order_ratio(const BracketedPowers& powers, const M& model, double x) {
  return nfold_ratio(powers, model, 2, x);
}

/// int_0^x F(y, inf) F(x-y, inf) dy / F(x, inf) by symmetric quadrature;
/// limit 2 mu. Points whose quadrature error exceeds 1% are flagged.
template <HeavyTailModel M>
CurvePoint sstar_ratio(const M& model, double x) {
  const double fx = model.tail(x);
  if (!(fx > 0.0)) return detail::undefined_point(x);
  const double half = 0.5 * x;
  std::vector<double> breaks = model.breakpoints(0.0, half);
  for (double b : model.breakpoints(half, x)) breaks.push_back(x - b);
  const auto r = integrate([&](double y) { return model.tail(y) * model.tail(x - y); }, 0.0, half, breaks, 1e-10);
  CurvePoint p;
  p.x = x;
  p.value = 2.0 * r.value / fx;
  p.lo = 2.0 * (r.value - r.error) / fx;
  p.hi = 2.0 * (r.value + r.error) / fx;
  p.flagged = r.error > 0.01 * std::fabs(r.value);
  return p;
}

/// F(x, x+t] / F(x, x+1]; limit t.
template <HeavyTailModel M>
CurvePoint local_ratio_limit(const M& model, double x, double t) {
  const double v = model.local_mass(x, t);
  return detail::ratio_point(x, {v, v}, model.local_mass(x, 1.0));
}

struct SmallnessRatios {
  CurvePoint r1;  // F(x, inf)^2 / F(x, x+1]
  CurvePoint r2;  // F(x/2, inf)^2 / F(x, x+1]
};

template <HeavyTailModel M>
SmallnessRatios smallness_ratios(const M& model, double x) {
  if (!(x > 0.0)) throw std::domain_error("smallness_ratios: x must be > 0");
  const double loc = model.local_mass(x, 1.0);
  const double a = model.tail(x), b = model.tail(0.5 * x);
  return {detail::ratio_point(x, {a * a, a * a}, loc), detail::ratio_point(x, {b * b, b * b}, loc)};
}

struct QuotientCurves {
  double y = 0.0;
  RatioCurve q;  // q(xy)/q(x), q = F(x, x+1]/F(x, inf)
  RatioCurve h;  // h(xy)/h(x), h = F(x, x+1]
};

/// Running-sup boundedness of q(xy)/q(x) and h(xy)/h(x) for each y.
template <HeavyTailModel M>
std::vector<QuotientCurves> hazard_quotient_boundedness(const M& model, std::span<const double> y_set,
                                                        std::span<const double> x_grid, VerdictRule rule = {}) {
  std::vector<QuotientCurves> out;
  auto h = [&](double x) { return model.local_mass(x, 1.0); };
  auto q = [&](double x) {
    const double f = model.tail(x);
    return f > 0.0 ? h(x) / f : std::numeric_limits<double>::quiet_NaN();
  };
  for (double y : y_set) {
    if (!(y > 0.0)) throw ConfigError("diagnostics.y_set", "entries must be > 0");
    QuotientCurves qc;
    qc.y = y;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "(y=%g)", y);
    qc.q.name = std::string("q_quotient") + suffix;
    qc.h.name = std::string("h_quotient") + suffix;
    qc.q.target = qc.h.target = Target::bounded();
    qc.q.rule = qc.h.rule = rule;
    for (double x : x_grid) {
      const double qx = q(x), qxy = q(x * y);
      const double hx = h(x), hxy = h(x * y);
      qc.q.points.push_back(std::isfinite(qx) && qx > 0.0 && std::isfinite(qxy)
                                ? detail::ratio_point(x, {qxy, qxy}, qx)
                                : detail::undefined_point(x));
      qc.h.points.push_back(detail::ratio_point(x, {hxy, hxy}, hx));
    }
    evaluate_verdict(qc.q);
    evaluate_verdict(qc.h);
    out.push_back(std::move(qc));
  }
  return out;
}

namespace detail {

// Stieltjes sum of g(y) = F(x-y, inf) - F(x, inf) = F(x-y, x] over lattice
// cells inside [a, b]; g is nondecreasing in y so LOWER/UPPER cell endpoints
// bracket the integral.
template <HeavyTailModel M>
Bracket stieltjes_increment(const M& model, const LatticePair& lat, double x, double a, double b) {
  const double h = lat.upper.step();
  auto g = [&](double y) {
    if (y <= 0.0) return 0.0;
    if (y >= x) return 1.0 - model.tail(x);
    return model.local_mass(x - y, y);
  };
  // cells ((k-1)h, kh] fully inside [a, b]
  const long k_first = static_cast<long>(std::ceil(a / h - 1e-9)) + 1;
  const long k_last = std::min<long>(static_cast<long>(std::floor(b / h + 1e-9)),
                                     static_cast<long>(lat.upper.last_index()));
  CompensatedSum lo, hi;
  const auto um = lat.upper.masses();
  const auto lm = lat.lower.masses();
  for (long k = k_first; k <= k_last; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    hi += um[ku] * g(static_cast<double>(k) * h);
    lo += lm[ku - 1] * g(static_cast<double>(k - 1) * h);
  }
  return {lo.value(), hi.value()};
}

}  // namespace detail

/// [int_A^{x-A} (F(x-y, inf) - F(x, inf)) dF(y) - F(x, inf)^2] / F(x, x+1],
/// with the Stieltjes integral taken against the lattice cell masses.
template <HeavyTailModel M>
CurvePoint integral_criterion(const LatticePair& lat, const M& model, double A, double x) {
  if (!(A > 0.0)) throw ConfigError("diagnostics.A_values", "A must be > 0");
  const double fx = model.tail(x);
  Bracket inc{0.0, 0.0};
  if (x > 2.0 * A) inc = detail::stieltjes_increment(model, lat, x, A, x - A);
  const Bracket num{inc.lo - fx * fx, inc.hi - fx * fx};
  return detail::ratio_point(x, num, model.local_mass(x, 1.0));
}

/// Right-hand side of F^{2*}(x, inf) - 2F(x, inf) = int_0^x (F(x-y, inf) - F(x, inf)) dF(y) - F(x, inf)^2,
/// divided by F(x, x+1]. An independent route to the second-order ratio.
template <HeavyTailModel M>
CurvePoint second_order_reconstruction(const LatticePair& lat, const M& model, double x) {
  const double fx = model.tail(x);
  const Bracket inc = detail::stieltjes_increment(model, lat, x, 0.0, x);
  return detail::ratio_point(x, {inc.lo - fx * fx, inc.hi - fx * fx}, model.local_mass(x, 1.0));
}

struct IntegralCriterionEntry {
  double A = 0.0;
  CurvePoint point;
};

struct KestenReport {
  double eps = 0.5;
  double A = 0.0;
  int n_max = 0;
  std::vector<double> sup;          // s_n, index n (entry 0 unused)
  std::vector<double> normalized;   // s_n / (1 + eps)^n
  std::vector<double> inf_signed;   // inf over x >= A of the signed ratio (lower bracket)
  double K_hat = 0.0;
  int n0 = 0;                       // normalized sup is nonincreasing on [n0, n_max]
  bool lower_bound_holds = true;    // inf_signed[n] >= -n^2 for all n
  bool pass = false;                // n0 <= n_max - 2

  /// Whether the normalized sups are nonincreasing on [from, to].
  bool nonincreasing_on(int from, int to) const {
    for (int n = from; n < to; ++n)
      if (normalized[static_cast<std::size_t>(n + 1)] > normalized[static_cast<std::size_t>(n)]) return false;
    return true;
  }
};

/// Smallest lattice point A with sup_{x >= A} F(x, inf)^2 / F(x, x+1] <= 1
/// over the grid below x_limit.
template <HeavyTailModel M>
double smallness_threshold(const M& model, double step, double x_limit) {
  const auto last = static_cast<long>(std::floor(x_limit / step));
  double A = static_cast<double>(last) * step;
  for (long k = last; k >= 0; --k) {
    const double x = static_cast<double>(k) * step;
    const double f = model.tail(x);
    const double loc = model.local_mass(x, 1.0);
    if (!(loc > 0.0) || f * f > loc) break;
    A = x;
  }
  return A;
}

/// Uniform-in-n bound check: s_n = sup_{x >= A} |F^{n*}(x, inf) - n F(x, inf)| / F(x, x+1]
/// over lattice points in [A, x_max - 1], normalized by (1 + eps)^n. Needs
/// materialized powers up to n_max. A <= 0 selects A by the smallness scan.
template <HeavyTailModel M>
KestenReport kesten_bound_check(const BracketedPowers& powers, const M& model, double eps, double A, int n_max) {
  if (!(eps > 0.0)) throw ConfigError("diagnostics.kesten_eps", "must be > 0");
  if (n_max < 1) throw ConfigError("diagnostics.kesten_n_max", "must be >= 1");
  const double h = powers.step();
  const double x_limit = powers.x_max() - 1.0;
  KestenReport rep;
  rep.eps = eps;
  rep.n_max = n_max;
  rep.A = A > 0.0 ? A : smallness_threshold(model, h, x_limit);
  rep.sup.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  rep.normalized.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  rep.inf_signed.assign(static_cast<std::size_t>(n_max) + 1, std::numeric_limits<double>::infinity());
  const long k0 = static_cast<long>(std::ceil(rep.A / h - 1e-9));
  const long k1 = static_cast<long>(std::floor(x_limit / h + 1e-9));
  std::vector<double> fx, loc;
  for (long k = k0; k <= k1; ++k) {
    const double x = static_cast<double>(k) * h;
    fx.push_back(model.tail(x));
    loc.push_back(model.local_mass(x, 1.0));
  }
  for (int n = 1; n <= n_max; ++n) {
    const auto& up = powers.upper().power(n);
    const auto& lowp = powers.lower().power(n);
    double s = 0.0, inf = std::numeric_limits<double>::infinity();
    for (long k = k0; k <= k1; ++k) {
      const auto i = static_cast<std::size_t>(k - k0);
      if (!(loc[i] > 0.0)) continue;
      const double base = static_cast<double>(n) * fx[i];
      const double lo = (lowp.tail_at_index(k) - base) / loc[i];
      const double hi = (up.tail_at_index(k) - base) / loc[i];
      s = std::max(s, std::fabs(0.5 * (lo + hi)));
      inf = std::min(inf, lo);
    }
    if (n == 1) s = 0.0;  // numerator is identically zero; lattice noise only
    const auto ni = static_cast<std::size_t>(n);
    rep.sup[ni] = s;
    rep.normalized[ni] = s / std::pow(1.0 + eps, n);
    rep.inf_signed[ni] = n == 1 ? 0.0 : inf;
    rep.K_hat = std::max(rep.K_hat, rep.normalized[ni]);
    if (rep.inf_signed[ni] < -static_cast<double>(n) * n) rep.lower_bound_holds = false;
  }
  rep.n0 = n_max;
  while (rep.n0 > 1 && rep.normalized[static_cast<std::size_t>(rep.n0 - 1)] >= rep.normalized[static_cast<std::size_t>(rep.n0)])
    --rep.n0;
  rep.pass = rep.n0 <= n_max - 2;
  return rep;
}

/// (H(x, inf) - K F(x, inf)) / F(x, x+1] with target -K/2, and
/// H(x, x+t] / F(x, x+t] with target K.
template <HeavyTailModel M>
RatioCurve tail_equivalence_check(const EquivalentTailModel<M>& H, std::span<const double> x_grid,
                                  VerdictRule rule = {0.02, 8, 4}) {
  RatioCurve c;
  c.name = "tail_equivalence";
  c.target = Target::of(-0.5 * H.K());
  c.rule = rule;
  for (double x : x_grid) {
    const double v = H.tail_excess(x);
    c.points.push_back(detail::ratio_point(x, {v, v}, H.source().local_mass(x, 1.0)));
  }
  evaluate_verdict(c);
  return c;
}

template <HeavyTailModel M>
RatioCurve tail_equivalence_local_check(const EquivalentTailModel<M>& H, std::span<const double> x_grid, double t,
                                        VerdictRule rule = {0.02, 8, 4}) {
  RatioCurve c;
  char buf[48];
  std::snprintf(buf, sizeof buf, "tail_equivalence_local(t=%g)", t);
  c.name = buf;
  c.target = Target::of(H.K());
  c.rule = rule;
  for (double x : x_grid) {
    const double v = H.local_mass(x, t);
    c.points.push_back(detail::ratio_point(x, {v, v}, H.source().local_mass(x, t)));
  }
  evaluate_verdict(c);
  return c;
}

struct DiagnosticsOptions {
  std::vector<double> probe_t{0.5, 1.0, 2.0};
  std::vector<double> local_limit_t{0.5, 2.0};
  std::vector<double> y_set{0.5, 2.0};
  std::vector<double> A_values{10.0, 50.0};
  double tolerance = 0.10;
  double local_limit_tolerance = 0.01;
  double sstar_tolerance = 0.10;
  int window = 8;
  int nfold_max = 2;  // n-fold curves for n = 2..nfold_max
  bool run_sstar = true;

  /// Tolerance of the n-fold curve: 10% at n = 2, widened by 5% per extra summand.
  double nfold_tolerance(int n) const { return tolerance + 0.05 * (n - 2); }
  VerdictRule rule(double tol) const { return {tol, window, 4}; }
};

struct ClassReport {
  std::string model_label;
  double step = 0.0;
  std::vector<RatioCurve> curves;
  std::map<std::string, Verdict> verdicts;  // class / condition name -> verdict
  Verdict s2 = Verdict::Inconclusive;
  std::vector<IntegralCriterionEntry> integral_matrix;
  std::optional<KestenReport> kesten;

  const RatioCurve* curve(const std::string& name) const {
    for (const auto& c : curves)
      if (c.name == name) return &c;
    return nullptr;
  }
  RatioCurve* curve(const std::string& name) {
    for (auto& c : curves)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Marks value curves whose last window spreads over more than half the
/// tolerance. Informational only; the verdict is unchanged.
inline void note_slow_convergence(RatioCurve& c) {
  if (c.target.kind != TargetKind::Value || !std::isfinite(c.last_window_spread)) return;
  if (c.verdict == Verdict::Diverges || c.last_window_spread <= 0.5 * c.rule.tolerance) return;
  char buf[96];
  std::snprintf(buf, sizeof buf, "slow convergence: last-window spread %.3g", c.last_window_spread);
  c.note += (c.note.empty() ? "" : "; ");
  c.note += buf;
}

inline std::string probe_name(const char* stem, const char* var, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s(%s=%g)", stem, var, v);
  return buf;
}

/// Sets the derived verdicts from the curves. The second-order class needs
/// every local probe and the second-order relation to converge.
inline void summarize_class_verdicts(ClassReport& rep, const DiagnosticsOptions& opt) {
  auto verdict_of = [&](const std::string& name) {
    const auto* c = rep.curve(name);
    return c ? c->verdict : Verdict::Inconclusive;
  };
  rep.verdicts.clear();
  rep.verdicts["S"] = verdict_of("subexp_ratio");
  bool all_local = true, any_diverges = false;
  for (double t : opt.probe_t) {
    const auto v = verdict_of(probe_name("local_subexp_ratio", "t", t));
    rep.verdicts[probe_name("S_delta", "t", t)] = v;
    all_local = all_local && v == Verdict::Converges;
    any_diverges = any_diverges || v == Verdict::Diverges;
  }
  const auto second = verdict_of("second_order_ratio");
  rep.verdicts["second_order_relation"] = second;
  if (rep.curve("sstar_ratio")) rep.verdicts["S_star"] = verdict_of("sstar_ratio");
  rep.verdicts["smallness_r1"] = verdict_of("smallness_r1");
  rep.verdicts["smallness_r2"] = verdict_of("smallness_r2");
  for (double y : opt.y_set) {
    rep.verdicts[probe_name("q_quotient", "y", y)] = verdict_of(probe_name("q_quotient", "y", y));
    rep.verdicts[probe_name("h_quotient", "y", y)] = verdict_of(probe_name("h_quotient", "y", y));
  }
  for (double t : opt.local_limit_t)
    rep.verdicts[probe_name("local_ratio_limit", "t", t)] = verdict_of(probe_name("local_ratio_limit", "t", t));
  for (int n = 3; n <= opt.nfold_max; ++n)
    rep.verdicts[probe_name("nfold_ratio", "n", n)] = verdict_of(probe_name("nfold_ratio", "n", n));

  if (all_local && second == Verdict::Converges) {
    rep.s2 = Verdict::Converges;
  } else if (any_diverges || second == Verdict::Diverges) {
    rep.s2 = Verdict::Diverges;
  } else {
    rep.s2 = Verdict::Inconclusive;
  }
  rep.verdicts["S2"] = rep.s2;
}

/// Runs every curve on x_grid (snapped to the lattice) and derives the
/// class verdicts.
template <HeavyTailModel M>
ClassReport diagnose(const M& model, const BracketedPowers& powers, const LatticePair& base,
                     std::span<const double> x_grid_in, const DiagnosticsOptions& opt) {
  ClassReport rep;
  rep.model_label = model.label();
  rep.step = powers.step();
  const std::vector<double> xs = snap_to_lattice(x_grid_in, powers.step());
  const double mu = eval_mean(model);

  auto make = [&](std::string name, Target target, double tol) {
    RatioCurve c;
    c.name = std::move(name);
    c.target = target;
    c.rule = opt.rule(tol);
    return c;
  };

  RatioCurve s = make("subexp_ratio", Target::of(2.0), opt.tolerance);
  for (double x : xs) s.points.push_back(subexp_ratio(powers, model, x));
  rep.curves.push_back(std::move(s));

  for (double t : opt.probe_t) {
    RatioCurve c = make(probe_name("local_subexp_ratio", "t", t), Target::of(2.0), opt.tolerance);
    for (double x : xs) c.points.push_back(local_subexp_ratio(powers, model, x, t));
    rep.curves.push_back(std::move(c));
  }

  for (int n = 2; n <= std::max(2, opt.nfold_max); ++n) {
    const double dn = static_cast<double>(n);
    RatioCurve c = make(n == 2 ? std::string("second_order_ratio") : probe_name("nfold_ratio", "n", n),
                        Target::of(dn * (dn - 1.0) * mu), opt.nfold_tolerance(n));
    for (double x : xs) c.points.push_back(nfold_ratio(powers, model, n, x));
    const auto flagged = c.flagged_count();
    if (flagged > 0) c.note = std::to_string(flagged) + " point(s) flagged CANCELLATION";
    rep.curves.push_back(std::move(c));
  }

  if (opt.run_sstar) {
    RatioCurve c = make("sstar_ratio", Target::of(2.0 * mu), opt.sstar_tolerance);
    for (double x : xs) c.points.push_back(sstar_ratio(model, x));
    rep.curves.push_back(std::move(c));
  }

  for (double t : opt.local_limit_t) {
    RatioCurve c = make(probe_name("local_ratio_limit", "t", t), Target::of(t), opt.local_limit_tolerance);
    for (double x : xs) c.points.push_back(local_ratio_limit(model, x, t));
    rep.curves.push_back(std::move(c));
  }

  RatioCurve r1 = make("smallness_r1", Target::zero(), opt.tolerance);
  RatioCurve r2 = make("smallness_r2", Target::zero(), opt.tolerance);
  for (double x : xs) {
    const auto sr = smallness_ratios(model, x);
    r1.points.push_back(sr.r1);
    r2.points.push_back(sr.r2);
  }
  rep.curves.push_back(std::move(r1));
  rep.curves.push_back(std::move(r2));

  for (auto& c : rep.curves) {
    evaluate_verdict(c);
    note_slow_convergence(c);
  }

  for (auto& qc : hazard_quotient_boundedness(model, opt.y_set, xs, opt.rule(opt.tolerance))) {
    rep.curves.push_back(std::move(qc.q));
    rep.curves.push_back(std::move(qc.h));
  }

  for (double A : opt.A_values)
    for (double x : xs) rep.integral_matrix.push_back({A, integral_criterion(base, model, A, x)});

  summarize_class_verdicts(rep, opt);
  return rep;
}

/// Downgrades every verdict of `coarse` that the half-step report does not
/// reproduce, then recomputes the derived verdicts. Returns the number of
/// curves that flipped.
inline int apply_step_halving(ClassReport& coarse, const ClassReport& fine, const DiagnosticsOptions& opt) {
  int flips = 0;
  for (auto& c : coarse.curves) {
    const auto* f = fine.curve(c.name);
    if (!f) continue;
    if (!reconcile_step_halving(c, *f)) ++flips;
  }
  summarize_class_verdicts(coarse, opt);
  return flips;
}

}  // namespace subexp
