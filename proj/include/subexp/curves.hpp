#pragma once

// Sampled ratio curves and the limit-verdict rule applied to them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace subexp {

enum class Verdict { Converges, Bounded, Diverges, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges: return "CONVERGES";
    case Verdict::Bounded: return "BOUNDED";
    case Verdict::Diverges: return "DIVERGES";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

enum class TargetKind { Value, Zero, Bounded };

struct Target {
  TargetKind kind = TargetKind::Value;
  double value = 0.0;

  static Target of(double v) { return {TargetKind::Value, v}; }
  static Target zero() { return {TargetKind::Zero, 0.0}; }
  static Target bounded() { return {TargetKind::Bounded, 0.0}; }

  std::string describe() const {
    switch (kind) {
      case TargetKind::Zero: return "zero";
      case TargetKind::Bounded: return "bounded";
      case TargetKind::Value: break;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
  }
};

struct CurvePoint {
  double x = 0.0;
  double value = std::numeric_limits<double>::quiet_NaN();  // point estimate
  double lo = std::numeric_limits<double>::quiet_NaN();     // uncertainty interval
  double hi = std::numeric_limits<double>::quiet_NaN();
  bool defined = true;   // false where a denominator vanishes or underflows
  bool flagged = false;  // excluded from verdicts (cancellation)

  bool usable() const { return defined && !flagged && std::isfinite(value); }
};

/// Tuning of the verdict rule.
struct VerdictRule {
  double tolerance = 0.10;  // relative, or absolute for zero targets
  int window = 8;           // points in the last window
  int min_points = 4;       // fewer usable points than this -> INCONCLUSIVE
};

struct RatioCurve {
  std::string name;
  Target target;
  std::vector<CurvePoint> points;
  VerdictRule rule;
  Verdict verdict = Verdict::Inconclusive;
  double last_window_estimate = std::numeric_limits<double>::quiet_NaN();
  double last_window_spread = std::numeric_limits<double>::quiet_NaN();
  std::string note;

  std::size_t flagged_count() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const CurvePoint& p) {
      return p.defined && p.flagged;
    }));
  }
};

/// Applies the last-window rule:
///  - value targets: CONVERGES when the window's relative spread and the
///    distance of its mean from the target are both below tolerance;
///    DIVERGES when the window is stable at a different value or moves away
///    from the target monotonically;
///  - zero targets: CONVERGES when every window value is below tolerance in
///    magnitude;
///  - bounded targets: BOUNDED when the running sup stops growing.
inline void evaluate_verdict(RatioCurve& curve) {
  std::vector<const CurvePoint*> usable;
  for (const auto& p : curve.points)
    if (p.usable()) usable.push_back(&p);
  const auto& rule = curve.rule;
  curve.verdict = Verdict::Inconclusive;
  if (static_cast<int>(usable.size()) < rule.min_points) {
    curve.last_window_estimate = std::numeric_limits<double>::quiet_NaN();
    curve.last_window_spread = std::numeric_limits<double>::quiet_NaN();
    if (curve.note.empty()) curve.note = "too few usable points";
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(rule.window), usable.size());
  const std::size_t first = usable.size() - w;
  std::vector<double> vals;
  for (std::size_t i = first; i < usable.size(); ++i) vals.push_back(usable[i]->value);
  const auto [mn_it, mx_it] = std::minmax_element(vals.begin(), vals.end());
  const double mn = *mn_it, mx = *mx_it;
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
  const double tol = rule.tolerance;

  switch (curve.target.kind) {
    case TargetKind::Value: {
      curve.last_window_estimate = mean;
      curve.last_window_spread = mean != 0.0 ? (mx - mn) / std::fabs(mean) : std::numeric_limits<double>::infinity();
      const double target = curve.target.value;
      const double miss = std::fabs(mean - target);
      const double scale = target != 0.0 ? std::fabs(target) : 1.0;
      if (curve.last_window_spread < tol && miss < tol * scale) {
        curve.verdict = Verdict::Converges;
      } else if (curve.last_window_spread < tol) {
        curve.verdict = Verdict::Diverges;
      } else {
        bool moving_away = true;
        for (std::size_t i = 1; i < vals.size(); ++i)
          if (std::fabs(vals[i] - target) <= std::fabs(vals[i - 1] - target)) moving_away = false;
        if (moving_away && std::fabs(vals.back() - target) > (1.0 + tol) * std::fabs(vals.front() - target))
          curve.verdict = Verdict::Diverges;
      }
      break;
    }
    case TargetKind::Zero: {
      double peak = 0.0;
      for (double v : vals) peak = std::max(peak, std::fabs(v));
      curve.last_window_estimate = mean;
      curve.last_window_spread = mx - mn;
      if (peak < tol) {
        curve.verdict = Verdict::Converges;
      } else {
        bool growing = true;
        for (std::size_t i = 1; i < vals.size(); ++i)
          if (std::fabs(vals[i]) < std::fabs(vals[i - 1])) growing = false;
        if (growing) curve.verdict = Verdict::Diverges;
      }
      break;
    }
    case TargetKind::Bounded: {
      curve.last_window_estimate = mx;
      curve.last_window_spread = mean != 0.0 ? (mx - mn) / std::fabs(mean) : 0.0;
      double prior = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < first; ++i) prior = std::max(prior, usable[i]->value);
      if (first == 0) {
        // no history: bounded only if the window itself is flat
        if (curve.last_window_spread < tol) curve.verdict = Verdict::Bounded;
        break;
      }
      if (mx <= prior + tol * std::fabs(prior)) {
        curve.verdict = Verdict::Bounded;
      } else {
        bool increasing = true;
        for (std::size_t i = 1; i < vals.size(); ++i)
          if (vals[i] < vals[i - 1]) increasing = false;
        if (increasing) curve.verdict = Verdict::Diverges;
      }
      break;
    }
  }
}

/// Step-halving check: a CONVERGES/BOUNDED verdict at step h that is not
/// reproduced at h/2 is downgraded to INCONCLUSIVE. Returns true if stable.
inline bool reconcile_step_halving(RatioCurve& coarse, const RatioCurve& fine) {
  const bool positive = coarse.verdict == Verdict::Converges || coarse.verdict == Verdict::Bounded;
  if (!positive) return true;
  if (fine.verdict == coarse.verdict) return true;
  coarse.verdict = Verdict::Inconclusive;
  coarse.note += (coarse.note.empty() ? "" : "; ");
  coarse.note += std::string("verdict flipped to ") + to_string(fine.verdict) + " under step halving";
  return false;
}

}  // namespace subexp
