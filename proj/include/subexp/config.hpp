#pragma once

// Declarative experiment configuration (JSON). Every validation failure is a
// ConfigError naming the offending dotted field.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subexp/counts.hpp"
#include "subexp/diagnostics.hpp"
#include "subexp/errors.hpp"
#include "subexp/lattice.hpp"
#include "subexp/models.hpp"
#include "subexp/montecarlo.hpp"
#include "subexp/numeric.hpp"

namespace subexp {

enum class RoundingPolicy { Upper, Lower, Both };

struct LatticeSpec {
  double step = 0.0;  // 0 = derive from the grid
  double x_max = 0.0; // 0 = grid x_max
  RoundingPolicy rounding = RoundingPolicy::Both;
};

struct GridSpec {
  double x_min = 10.0;
  double x_max = 1000.0;
  double ratio = kEighthDecade;
};

struct DiagnosticsSpec {
  DiagnosticsOptions options;
  bool kesten = false;
  double kesten_eps = 0.5;
  int kesten_n_max = 8;
  double kesten_A = 0.0;  // 0 = smallness scan
  bool tail_equivalence = false;
};

struct MonteCarloSpec {
  std::size_t n_samples = 1000000;
  std::optional<std::uint64_t> seed;
};

struct OutputSpec {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Model model{ParetoModel(1.0, 2.0)};
  CountModel count = CountModel::deterministic(1);
  LatticeSpec lattice;
  GridSpec grid;
  DiagnosticsSpec diagnostics;
  MonteCarloSpec montecarlo;
  OutputSpec output;
  nlohmann::json source;  // the document as read, copied next to the outputs

  /// Lattice step, defaulting to one thousandth of the first grid point.
  double step() const { return lattice.step > 0.0 ? lattice.step : 1e-3 * grid.x_min; }
  /// Lattice range, defaulting to the grid end plus room for the widest
  /// local probe.
  double lattice_x_max() const {
    if (lattice.x_max > 0.0) return lattice.x_max;
    double reach = 1.0;
    for (double t : diagnostics.options.probe_t) reach = std::max(reach, t);
    return grid.x_max + reach + step();
  }
  std::vector<double> x_grid() const { return geometric_grid(grid.x_min, grid.x_max, grid.ratio); }
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const std::string& key, const std::string& field) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(field, "is required");
  return obj.at(key);
}

inline double get_number(const json& obj, const std::string& key, const std::string& prefix) {
  const std::string field = prefix + "." + key;
  const json& v = require(obj, key, field);
  if (!v.is_number()) throw ConfigError(field, "must be a number");
  return v.get<double>();
}

inline double get_number_or(const json& obj, const std::string& key, const std::string& prefix, double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return get_number(obj, key, prefix);
}

inline long get_integer(const json& obj, const std::string& key, const std::string& prefix) {
  const std::string field = prefix + "." + key;
  const json& v = require(obj, key, field);
  if (!v.is_number_integer()) throw ConfigError(field, "must be an integer");
  return v.get<long>();
}

inline long get_integer_or(const json& obj, const std::string& key, const std::string& prefix, long fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return get_integer(obj, key, prefix);
}

inline bool get_bool_or(const json& obj, const std::string& key, const std::string& prefix, bool fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) throw ConfigError(prefix + "." + key, "must be true or false");
  return obj.at(key).get<bool>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& prefix) {
  const std::string field = prefix + "." + key;
  const json& v = require(obj, key, field);
  if (!v.is_string()) throw ConfigError(field, "must be a string");
  return v.get<std::string>();
}

inline std::vector<double> get_numbers_or(const json& obj, const std::string& key, const std::string& prefix,
                                          std::vector<double> fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const std::string field = prefix + "." + key;
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(field, "must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(field, "must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline Model parse_model(const json& m) {
  if (!m.is_object()) throw ConfigError("model", "must be an object");
  const std::string fam = get_string(m, "family", "model");
  if (fam == "pareto") return ParetoModel(get_number(m, "c", "model"), get_number(m, "alpha", "model"));
  if (fam == "lognormal")
    return LognormalModel(get_number(m, "mu_log", "model"), get_number(m, "sigma", "model"));
  if (fam == "weibull") return WeibullModel(get_number(m, "beta", "model"));
  if (fam == "piecewise_pareto")
    return PiecewiseParetoModel(get_number(m, "c", "model"), get_number(m, "alpha", "model"),
                                get_number(m, "beta", "model"));
  if (fam == "point_mass") return PointMassModel(get_number(m, "at", "model"));
  throw ConfigError("model.family", "unknown family '" + fam + "'");
}

inline CountModel parse_count(const json& c) {
  if (!c.is_object()) throw ConfigError("count", "must be an object");
  const std::string fam = get_string(c, "family", "count");
  if (fam == "poisson") return CountModel::poisson(get_number(c, "lambda", "count"));
  if (fam == "geometric") return CountModel::geometric(get_number(c, "rho", "count"));
  if (fam == "negative_binomial")
    return CountModel::negative_binomial(get_number(c, "r", "count"), get_number(c, "rho", "count"));
  if (fam == "deterministic") return CountModel::deterministic(get_integer(c, "n", "count"));
  if (fam == "finite_support") {
    const json& atoms = require(c, "atoms", "count.atoms");
    if (!atoms.is_array()) throw ConfigError("count.atoms", "must be an array of [n, p] pairs");
    std::vector<std::pair<long, double>> pairs;
    for (const auto& a : atoms) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number())
        throw ConfigError("count.atoms", "must be an array of [n, p] pairs");
      pairs.emplace_back(a[0].get<long>(), a[1].get<double>());
    }
    return CountModel::finite_support(std::move(pairs));
  }
  throw ConfigError("count.family", "unknown family '" + fam + "'");
}

}  // namespace detail

/// Builds and validates a config from a parsed JSON document.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  using detail::json;
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  ExperimentConfig cfg;
  cfg.source = doc;
  if (doc.contains("name")) cfg.name = detail::get_string(doc, "name", "config");
  cfg.model = detail::parse_model(detail::require(doc, "model", "model"));
  if (doc.contains("count")) cfg.count = detail::parse_count(doc.at("count"));
  if (!(cfg.count.pgf_radius() > 1.0)) throw ConfigError("count", "pgf radius of convergence must exceed 1");

  const json empty = json::object();
  const json& g = doc.contains("grid") ? doc.at("grid") : empty;
  cfg.grid.x_min = detail::get_number_or(g, "x_min", "grid", cfg.grid.x_min);
  cfg.grid.x_max = detail::get_number_or(g, "x_max", "grid", cfg.grid.x_max);
  cfg.grid.ratio = detail::get_number_or(g, "ratio", "grid", cfg.grid.ratio);
  (void)cfg.x_grid();  // validates the grid fields

  const json& l = doc.contains("lattice") ? doc.at("lattice") : empty;
  cfg.lattice.step = detail::get_number_or(l, "step", "lattice", 0.0);
  if (l.contains("step") && !(cfg.lattice.step > 0.0)) throw ConfigError("lattice.step", "must be > 0");
  cfg.lattice.x_max = detail::get_number_or(l, "x_max", "lattice", 0.0);
  if (l.contains("x_max") && !(cfg.lattice.x_max >= cfg.grid.x_max))
    throw ConfigError("lattice.x_max", "must be >= grid.x_max");
  if (l.is_object() && l.contains("rounding")) {
    const std::string r = detail::get_string(l, "rounding", "lattice");
    if (r == "upper") cfg.lattice.rounding = RoundingPolicy::Upper;
    else if (r == "lower") cfg.lattice.rounding = RoundingPolicy::Lower;
    else if (r == "both") cfg.lattice.rounding = RoundingPolicy::Both;
    else throw ConfigError("lattice.rounding", "must be upper, lower or both");
  }
  if (cfg.step() >= cfg.grid.x_min) throw ConfigError("lattice.step", "must be below grid.x_min");

  const json& d = doc.contains("diagnostics") ? doc.at("diagnostics") : empty;
  auto& opt = cfg.diagnostics.options;
  opt.probe_t = detail::get_numbers_or(d, "probe_t", "diagnostics", opt.probe_t);
  opt.local_limit_t = detail::get_numbers_or(d, "local_limit_t", "diagnostics", opt.local_limit_t);
  opt.y_set = detail::get_numbers_or(d, "y_set", "diagnostics", opt.y_set);
  opt.A_values = detail::get_numbers_or(d, "A_values", "diagnostics", opt.A_values);
  opt.tolerance = detail::get_number_or(d, "tolerance", "diagnostics", opt.tolerance);
  opt.local_limit_tolerance = detail::get_number_or(d, "local_limit_tolerance", "diagnostics", opt.local_limit_tolerance);
  opt.sstar_tolerance = detail::get_number_or(d, "sstar_tolerance", "diagnostics", opt.sstar_tolerance);
  opt.window = static_cast<int>(detail::get_integer_or(d, "window", "diagnostics", opt.window));
  opt.nfold_max = static_cast<int>(detail::get_integer_or(d, "nfold_max", "diagnostics", opt.nfold_max));
  opt.run_sstar = detail::get_bool_or(d, "sstar", "diagnostics", opt.run_sstar);
  cfg.diagnostics.kesten = detail::get_bool_or(d, "kesten", "diagnostics", false);
  cfg.diagnostics.kesten_eps = detail::get_number_or(d, "kesten_eps", "diagnostics", 0.5);
  cfg.diagnostics.kesten_n_max = static_cast<int>(detail::get_integer_or(d, "kesten_n_max", "diagnostics", 8));
  cfg.diagnostics.kesten_A = detail::get_number_or(d, "kesten_A", "diagnostics", 0.0);
  cfg.diagnostics.tail_equivalence = detail::get_bool_or(d, "tail_equivalence", "diagnostics", false);
  for (double t : opt.probe_t)
    if (!(t > 0.0)) throw ConfigError("diagnostics.probe_t", "entries must be > 0");
  for (double t : opt.local_limit_t)
    if (!(t > 0.0)) throw ConfigError("diagnostics.local_limit_t", "entries must be > 0");
  for (double y : opt.y_set)
    if (!(y > 0.0)) throw ConfigError("diagnostics.y_set", "entries must be > 0");
  for (double a : opt.A_values)
    if (!(a > 0.0)) throw ConfigError("diagnostics.A_values", "entries must be > 0");
  if (!(opt.tolerance > 0.0 && opt.tolerance < 1.0)) throw ConfigError("diagnostics.tolerance", "must lie in (0, 1)");
  if (opt.window < 4) throw ConfigError("diagnostics.window", "must be >= 4");
  if (opt.nfold_max < 2) throw ConfigError("diagnostics.nfold_max", "must be >= 2");
  if (!(cfg.diagnostics.kesten_eps > 0.0)) throw ConfigError("diagnostics.kesten_eps", "must be > 0");
  if (cfg.diagnostics.kesten_n_max < 2) throw ConfigError("diagnostics.kesten_n_max", "must be >= 2");

  const json& mc = doc.contains("montecarlo") ? doc.at("montecarlo") : empty;
  const long ns = detail::get_integer_or(mc, "n_samples", "montecarlo", static_cast<long>(cfg.montecarlo.n_samples));
  if (ns < static_cast<long>(kMinSimulationSamples))
    throw ConfigError("montecarlo.n_samples", "must be >= " + std::to_string(kMinSimulationSamples));
  cfg.montecarlo.n_samples = static_cast<std::size_t>(ns);
  if (mc.is_object() && mc.contains("seed")) {
    const long seed = detail::get_integer(mc, "seed", "montecarlo");
    if (seed < 0) throw ConfigError("montecarlo.seed", "must be >= 0");
    cfg.montecarlo.seed = static_cast<std::uint64_t>(seed);
  }

  const json& o = doc.contains("output") ? doc.at("output") : empty;
  if (o.is_object() && o.contains("dir")) cfg.output.dir = detail::get_string(o, "dir", "output");
  if (o.is_object() && o.contains("formats")) {
    const json& f = o.at("formats");
    if (!f.is_array()) throw ConfigError("output.formats", "must be an array");
    cfg.output.csv = cfg.output.json = false;
    for (const auto& e : f) {
      if (e == "csv") cfg.output.csv = true;
      else if (e == "json") cfg.output.json = true;
      else throw ConfigError("output.formats", "entries must be \"csv\" or \"json\"");
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace subexp
