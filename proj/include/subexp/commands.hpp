#pragma once

// Subcommand bodies shared by the CLI and the tests. Each command reads a
// validated config, writes its files under an output directory and returns
// a process exit status.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "subexp/asymptotics.hpp"
#include "subexp/config.hpp"
#include "subexp/diagnostics.hpp"
#include "subexp/errors.hpp"
#include "subexp/io.hpp"
#include "subexp/lattice.hpp"
#include "subexp/montecarlo.hpp"

namespace subexp {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitResource = 3,
  kExitNumerical = 4,
};

inline constexpr const char* kOutputDirEnv = "SUBEXP_OUTPUT_DIR";

/// A curve fails numerical quality when more than this share of its
/// defined points is flagged.
inline constexpr double kFlaggedShareLimit = 0.5;

/// Output directory: explicit override, then the environment, then the config.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                                const std::optional<std::string>& override_dir = std::nullopt) {
  if (override_dir && !override_dir->empty()) return *override_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output.dir;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

template <class Fn>
void write_stream(const std::filesystem::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_text(path, os.str());
}

inline std::string file_stem(const std::string& curve_name) {
  std::string s;
  for (char c : curve_name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') s += c;
    else if (c == '(' || c == '=') s += '_';
  }
  return s;
}

inline bool too_many_flags(const RatioCurve& c) {
  std::size_t defined = 0;
  for (const auto& p : c.points) defined += p.defined ? 1 : 0;
  return defined > 0 && static_cast<double>(c.flagged_count()) > kFlaggedShareLimit * static_cast<double>(defined);
}

struct LatticeSet {
  std::optional<LatticeDistribution> upper;
  std::optional<LatticeDistribution> lower;
};

template <HeavyTailModel M>
LatticeSet build_lattices(const M& model, const ExperimentConfig& cfg, double step) {
  LatticeSet s;
  const double x_max = cfg.lattice_x_max();
  if (cfg.lattice.rounding != RoundingPolicy::Lower) s.upper = discretize(model, step, x_max, Rounding::Upper);
  if (cfg.lattice.rounding != RoundingPolicy::Upper) s.lower = discretize(model, step, x_max, Rounding::Lower);
  return s;
}

inline VerdictRule config_rule(const ExperimentConfig& cfg) {
  return cfg.diagnostics.options.rule(cfg.diagnostics.options.tolerance);
}

template <HeavyTailModel M>
ApproximationReport approx_report(const M& model, const ExperimentConfig& cfg, double step) {
  const auto lat = build_lattices(model, cfg, step);
  const auto xs = snap_to_lattice(cfg.x_grid(), step);
  const LatticeDistribution& primary = lat.upper ? *lat.upper : *lat.lower;
  const LatticeDistribution* secondary = lat.upper && lat.lower ? &*lat.lower : nullptr;
  return approximate(model, cfg.count, primary, secondary, xs, config_rule(cfg), cfg.diagnostics.kesten_eps);
}

inline int full_power_needed(const ExperimentConfig& cfg) {
  int p = std::max(1, (cfg.diagnostics.options.nfold_max + 1) / 2);
  if (cfg.diagnostics.kesten) p = std::max(p, cfg.diagnostics.kesten_n_max);
  return p;
}

template <HeavyTailModel M>
ClassReport class_report(const M& model, const ExperimentConfig& cfg, double step) {
  auto pair = discretize_pair(model, step, cfg.lattice_x_max());
  const BracketedPowers powers(pair, full_power_needed(cfg));
  const auto xs = cfg.x_grid();
  ClassReport rep = diagnose(model, powers, pair, xs, cfg.diagnostics.options);
  if (cfg.diagnostics.kesten)
    rep.kesten = kesten_bound_check(powers, model, cfg.diagnostics.kesten_eps, cfg.diagnostics.kesten_A,
                                    cfg.diagnostics.kesten_n_max);
  if (cfg.diagnostics.tail_equivalence) {
    const auto H = build_equivalent_tail(model);
    auto c = tail_equivalence_check(H, xs);
    rep.curves.push_back(std::move(c));
    rep.curves.push_back(tail_equivalence_local_check(H, xs, 1.0));
  }
  return rep;
}

inline void copy_config(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  write_json(dir / "config.json", cfg.source);
}

}  // namespace detail

/// Writes approx.csv / approx.json. Returns 4 when the residual curve is
/// dominated by cancellation-flagged points.
inline int cmd_approx(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const ApproximationReport rep =
      std::visit([&](const auto& m) { return detail::approx_report(m, cfg, cfg.step()); }, cfg.model.variant());
  detail::copy_config(cfg, dir);
  if (cfg.output.csv) detail::write_stream(dir / "approx.csv", [&](std::ostream& os) { write_csv(os, rep); });
  if (cfg.output.json) detail::write_json(dir / "approx.json", to_json(rep));
  const auto& c = rep.residual_curve;
  log << "approx " << rep.model_label << " / " << rep.count_label << ": residual " << fmt_num(c.last_window_estimate)
      << " (target " << c.target.describe() << ") " << to_string(c.verdict) << '\n';
  if (detail::too_many_flags(c)) {
    log << "numerical quality: " << c.flagged_count() << " residual point(s) flagged CANCELLATION\n";
    return kExitNumerical;
  }
  return kExitOk;
}

inline void write_class_report(const ClassReport& rep, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  detail::write_text(dir / "verdicts.txt", render_verdict_table(rep));
  if (cfg.output.json) detail::write_json(dir / "diagnose.json", to_json(rep));
  if (!cfg.output.csv) return;
  for (const auto& c : rep.curves)
    detail::write_stream(dir / "curves" / (detail::file_stem(c.name) + ".csv"), [&](std::ostream& os) { write_csv(os, c); });
  detail::write_stream(dir / "integral_criterion.csv", [&](std::ostream& os) {
    os << "A,x,value,lo,hi,defined\n";
    for (const auto& e : rep.integral_matrix)
      os << fmt_num(e.A) << ',' << fmt_num(e.point.x) << ',' << fmt_num(e.point.value) << ',' << fmt_num(e.point.lo)
         << ',' << fmt_num(e.point.hi) << ',' << (e.point.defined ? 1 : 0) << '\n';
  });
  detail::write_stream(dir / "verdicts.csv", [&](std::ostream& os) {
    os << "name,verdict\n";
    for (const auto& [name, v] : rep.verdicts) os << name << ',' << to_string(v) << '\n';
  });
}

inline int cmd_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const ClassReport rep =
      std::visit([&](const auto& m) { return detail::class_report(m, cfg, cfg.step()); }, cfg.model.variant());
  detail::copy_config(cfg, dir);
  write_class_report(rep, cfg, dir);
  log << render_verdict_table(rep) << "S2 " << to_string(rep.s2) << '\n';
  if (rep.kesten) log << "  kesten " << (rep.kesten->pass ? "PASS" : "FAIL") << " K_hat " << fmt_num(rep.kesten->K_hat) << '\n';
  for (const auto& c : rep.curves)
    if (c.name == "second_order_ratio" && detail::too_many_flags(c)) {
      log << "numerical quality: second-order curve dominated by CANCELLATION flags\n";
      return kExitNumerical;
    }
  return kExitOk;
}

/// Reruns diagnostics and the compound residual at step h and h/2 and
/// reports per-curve verdict stability.
inline int cmd_study(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const double h = cfg.step();
  auto run = [&](double step) {
    return std::visit(
        [&](const auto& m) {
          ClassReport rep = detail::class_report(m, cfg, step);
          rep.curves.push_back(detail::approx_report(m, cfg, step).residual_curve);
          return rep;
        },
        cfg.model.variant());
  };
  ClassReport coarse = run(h);
  const ClassReport fine = run(0.5 * h);
  std::vector<std::pair<Verdict, std::string>> before;
  for (const auto& c : coarse.curves) before.emplace_back(c.verdict, c.name);
  const int flips = apply_step_halving(coarse, fine, cfg.diagnostics.options);

  detail::copy_config(cfg, dir);
  if (cfg.output.csv) {
    for (const auto& c : coarse.curves) {
      const auto* f = fine.curve(c.name);
      detail::write_stream(dir / "study" / (detail::file_stem(c.name) + ".csv"), [&](std::ostream& os) {
        os << "step," << kCurveColumns << '\n';
        for (const auto* curve : {&c, f}) {
          if (!curve) continue;
          const double s = curve == &c ? h : 0.5 * h;
          for (const auto& p : curve->points)
            os << fmt_num(s) << ',' << fmt_num(p.x) << ',' << fmt_num(p.value) << ',' << fmt_num(p.lo) << ','
               << fmt_num(p.hi) << ',' << (p.defined ? 1 : 0) << ',' << (p.flagged ? 1 : 0) << '\n';
        }
      });
    }
  }
  nlohmann::json summary;
  summary["model"] = coarse.model_label;
  summary["count"] = cfg.count.label();
  summary["step"] = h;
  summary["half_step"] = 0.5 * h;
  summary["flips"] = flips;
  summary["S2"] = to_string(coarse.s2);
  auto& rows = summary["curves"] = nlohmann::json::array();
  std::ostringstream table;
  table << "curve,target,verdict_step,verdict_half_step,estimate_step,estimate_half_step,spread_step,spread_half_step,"
           "stable,note\n";
  for (std::size_t i = 0; i < coarse.curves.size(); ++i) {
    const auto& c = coarse.curves[i];
    const auto* f = fine.curve(c.name);
    const Verdict v0 = before[i].first;
    const bool stable = !f || f->verdict == v0;
    nlohmann::json row{{"curve", c.name},
                       {"target", c.target.describe()},
                       {"verdict_step", to_string(v0)},
                       {"verdict_half_step", f ? to_string(f->verdict) : "n/a"},
                       {"estimate_step", json_num(c.last_window_estimate)},
                       {"estimate_half_step", f ? json_num(f->last_window_estimate) : nlohmann::json(nullptr)},
                       {"spread_step", json_num(c.last_window_spread)},
                       {"stable", stable},
                       {"reported_verdict", to_string(c.verdict)},
                       {"note", c.note}};
    rows.push_back(row);
    std::string note = c.note;
    std::replace(note.begin(), note.end(), ',', ';');
    table << c.name << ',' << c.target.describe() << ',' << to_string(v0) << ','
          << (f ? to_string(f->verdict) : "n/a") << ',' << fmt_num(c.last_window_estimate) << ','
          << (f ? fmt_num(f->last_window_estimate) : "nan") << ',' << fmt_num(c.last_window_spread) << ','
          << (f ? fmt_num(f->last_window_spread) : "nan") << ',' << (stable ? 1 : 0) << ',' << note << '\n';
  }
  if (cfg.output.json) detail::write_json(dir / "study_summary.json", summary);
  if (cfg.output.csv) detail::write_text(dir / "study_summary.csv", table.str());
  log << "study " << coarse.model_label << ": " << coarse.curves.size() << " curves, " << flips
      << " verdict flip(s) under step halving, S2 " << to_string(coarse.s2) << '\n';
  return kExitOk;
}

/// Plain Monte Carlo estimates on the grid points that keep at least 100
/// observed exceedances.
inline int cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  const auto xs = cfg.x_grid();
  std::vector<SimulationEstimate> kept;
  std::visit(
      [&](const auto& m) {
        const auto est = simulate_compound_tail(m, cfg.count, xs, cfg.montecarlo.n_samples, cfg.montecarlo.seed);
        for (const auto& e : est)
          if (e.estimate * static_cast<double>(e.n_samples) >= 100.0) kept.push_back(e);
        detail::copy_config(cfg, dir);
        if (cfg.output.csv)
          detail::write_stream(dir / "simulate.csv", [&](std::ostream& os) { write_csv(os, kept, m, cfg.count); });
      },
      cfg.model.variant());
  if (cfg.output.json) {
    nlohmann::json j;
    j["model"] = cfg.model.label();
    j["count"] = cfg.count.label();
    j["n_samples"] = cfg.montecarlo.n_samples;
    j["seed"] = *cfg.montecarlo.seed;
    auto& rows = j["estimates"] = nlohmann::json::array();
    for (const auto& e : kept) rows.push_back({{"x", e.x}, {"estimate", e.estimate}, {"std_error", e.std_error}});
    detail::write_json(dir / "simulate.json", j);
  }
  log << "simulate " << cfg.model.label() << " / " << cfg.count.label() << ": " << kept.size() << " of " << xs.size()
      << " grid points with >= 100 exceedances\n";
  return kExitOk;
}

}  // namespace subexp
