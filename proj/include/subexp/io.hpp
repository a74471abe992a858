#pragma once

// CSV and JSON serialization. Column orders are part of the public contract
// and only ever grow at the end.

#include <cmath>
#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subexp/asymptotics.hpp"
#include "subexp/curves.hpp"
#include "subexp/diagnostics.hpp"
#include "subexp/montecarlo.hpp"

namespace subexp {

inline constexpr const char* kApproxColumns = "x,exact_lo,exact_hi,first_order,second_order,residual_ratio";
inline constexpr const char* kCurveColumns = "x,value,lo,hi,defined,flagged";
inline constexpr const char* kSimulationColumns =
    "x,exact_lo,exact_hi,first_order,second_order,residual_ratio,estimate,std_error,n_samples,seed";

/// Round-trippable, locale-free number formatting; NaN is written as "nan".
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline nlohmann::json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline void write_csv(std::ostream& os, const ApproximationReport& rep) {
  os << kApproxColumns << '\n';
  for (const auto& r : rep.rows)
    os << fmt_num(r.x) << ',' << fmt_num(r.exact_lo) << ',' << fmt_num(r.exact_hi) << ',' << fmt_num(r.first_order)
       << ',' << fmt_num(r.second_order) << ',' << fmt_num(r.residual_ratio) << '\n';
}

inline void write_csv(std::ostream& os, const RatioCurve& c) {
  os << kCurveColumns << '\n';
  for (const auto& p : c.points)
    os << fmt_num(p.x) << ',' << fmt_num(p.value) << ',' << fmt_num(p.lo) << ',' << fmt_num(p.hi) << ','
       << (p.defined ? 1 : 0) << ',' << (p.flagged ? 1 : 0) << '\n';
}

/// Simulation rows in the approximation schema: the exact columns hold the
/// estimate -/+ 3 standard errors, the residual is taken from the estimate.
template <HeavyTailModel M>
void write_csv(std::ostream& os, const std::vector<SimulationEstimate>& est, const M& model, const CountModel& count) {
  os << kSimulationColumns << '\n';
  for (const auto& e : est) {
    const double first = first_order_tail(model, count, e.x);
    const double loc = model.local_mass(e.x, 1.0);
    os << fmt_num(e.x) << ',' << fmt_num(std::max(0.0, e.estimate - 3.0 * e.std_error)) << ','
       << fmt_num(e.estimate + 3.0 * e.std_error) << ',' << fmt_num(first) << ','
       << fmt_num(second_order_tail(model, count, e.x)) << ','
       << fmt_num(loc > 0.0 ? (e.estimate - first) / loc : std::nan("")) << ',' << fmt_num(e.estimate) << ','
       << fmt_num(e.std_error) << ',' << e.n_samples << ',' << e.seed << '\n';
  }
}

inline nlohmann::json to_json(const RatioCurve& c, bool with_points = false) {
  nlohmann::json j;
  j["name"] = c.name;
  j["target"] = c.target.describe();
  j["verdict"] = to_string(c.verdict);
  j["last_window_estimate"] = json_num(c.last_window_estimate);
  j["last_window_spread"] = json_num(c.last_window_spread);
  j["tolerance"] = c.rule.tolerance;
  j["flagged_points"] = c.flagged_count();
  j["note"] = c.note;
  if (with_points) {
    auto& pts = j["points"] = nlohmann::json::array();
    for (const auto& p : c.points)
      pts.push_back({{"x", p.x}, {"value", json_num(p.value)}, {"lo", json_num(p.lo)}, {"hi", json_num(p.hi)},
                     {"defined", p.defined}, {"flagged", p.flagged}});
  }
  return j;
}

inline nlohmann::json to_json(const ApproximationReport& rep) {
  nlohmann::json j;
  j["model"] = rep.model_label;
  j["count"] = rep.count_label;
  j["step"] = rep.step;
  j["mean"] = rep.mean;
  j["m1"] = rep.moments.m1;
  j["m2f"] = rep.moments.m2f;
  j["residual_target"] = rep.target();
  j["residual_curve"] = to_json(rep.residual_curve);
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"x", r.x},
                    {"exact_lo", r.exact_lo},
                    {"exact_hi", r.exact_hi},
                    {"first_order", r.first_order},
                    {"second_order", r.second_order},
                    {"residual_ratio", json_num(r.residual_ratio)},
                    {"flagged", r.flagged}});
  return j;
}

inline nlohmann::json to_json(const KestenReport& k) {
  nlohmann::json j;
  j["eps"] = k.eps;
  j["A"] = k.A;
  j["n_max"] = k.n_max;
  j["K_hat"] = k.K_hat;
  j["n0"] = k.n0;
  j["lower_bound_holds"] = k.lower_bound_holds;
  j["verdict"] = k.pass ? "PASS" : "FAIL";
  auto& rows = j["rows"] = nlohmann::json::array();
  for (int n = 1; n <= k.n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    rows.push_back({{"n", n}, {"sup", k.sup[i]}, {"normalized", k.normalized[i]}, {"inf_signed", k.inf_signed[i]}});
  }
  return j;
}

inline nlohmann::json to_json(const ClassReport& rep) {
  nlohmann::json j;
  j["model"] = rep.model_label;
  j["step"] = rep.step;
  j["S2"] = to_string(rep.s2);
  auto& v = j["verdicts"] = nlohmann::json::object();
  for (const auto& [name, verdict] : rep.verdicts) v[name] = to_string(verdict);
  auto& curves = j["curves"] = nlohmann::json::array();
  for (const auto& c : rep.curves) curves.push_back(to_json(c));
  auto& m = j["integral_criterion"] = nlohmann::json::array();
  for (const auto& e : rep.integral_matrix)
    m.push_back({{"A", e.A}, {"x", e.point.x}, {"value", json_num(e.point.value)}, {"lo", json_num(e.point.lo)},
                 {"hi", json_num(e.point.hi)}});
  if (rep.kesten) j["kesten"] = to_json(*rep.kesten);
  return j;
}

/// Plain-text verdict summary: one row per curve, then the derived class
/// verdicts.
inline std::string render_verdict_table(const ClassReport& rep) {
  std::vector<std::array<std::string, 6>> rows;
  rows.push_back({"curve", "target", "estimate", "spread", "verdict", "note"});
  for (const auto& c : rep.curves)
    rows.push_back({c.name, c.target.describe(), fmt_num(c.last_window_estimate), fmt_num(c.last_window_spread),
                    to_string(c.verdict), c.note});
  std::array<std::size_t, 6> width{};
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::ostringstream os;
  os << rep.model_label << " (step " << fmt_num(rep.step) << ")\n";
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
  }
  std::size_t name_width = 0;
  for (const auto& [name, v] : rep.verdicts) name_width = std::max(name_width, name.size());
  os << '\n';
  for (const auto& [name, v] : rep.verdicts)
    os << name << std::string(name_width - name.size() + 2, ' ') << to_string(v) << '\n';
  return os.str();
}

}  // namespace subexp
