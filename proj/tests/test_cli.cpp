#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "subexp/commands.hpp"
#include "subexp/io.hpp"

using namespace subexp;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("subexp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

RunResult run_cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = (env.empty() ? "" : env + " ") + "'" + SUBEXP_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string config_error_field(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

const std::string kSmallStudy = R"({
  "name": "small-study",
  "model": {"family": "pareto", "c": 1.0, "alpha": 2.0},
  "count": {"family": "geometric", "rho": 0.5},
  "lattice": {"step": 0.1},
  "grid": {"x_min": 10.0, "x_max": 100.0},
  "diagnostics": {"A_values": [5.0]}
})";

}  // namespace

TEST(Config, ValidationNamesTheField) {
  EXPECT_EQ(config_error_field(R"({"model": {"family": "pareto", "c": 1, "alpha": 0.5}})"), "model.alpha");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "weibull", "beta": 1.5}})"), "model.beta");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "pareto", "c": 1, "alpha": 2},
                                   "count": {"family": "geometric", "rho": 1.0}})"),
            "count.rho");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "pareto", "c": 1, "alpha": 2}, "lattice": {"step": -0.1}})"),
            "lattice.step");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "pareto", "c": 1, "alpha": 2},
                                   "count": {"family": "finite_support", "atoms": [[1, 0.5], [2, 0.4]]}})"),
            "count.atoms");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "gamma"}})"), "model.family");
  EXPECT_EQ(config_error_field(R"({"count": {"family": "poisson", "lambda": 1}})"), "model");
  EXPECT_EQ(config_error_field(R"({"model": {"family": "pareto", "c": 1, "alpha": 2},
                                   "montecarlo": {"n_samples": 100}})"),
            "montecarlo.n_samples");
  EXPECT_EQ(config_error_field("{not json"), "config");
}

TEST(Config, Defaults) {
  const auto cfg = parse_config_text(R"({"model": {"family": "lognormal", "mu_log": 0, "sigma": 1}})");
  EXPECT_EQ(cfg.count.label(), "deterministic(n=1)");
  EXPECT_DOUBLE_EQ(cfg.step(), 0.001 * cfg.grid.x_min);
  EXPECT_GE(cfg.lattice_x_max(), cfg.grid.x_max + 2.0);
  EXPECT_FALSE(cfg.montecarlo.seed.has_value());
  EXPECT_EQ(cfg.x_grid().front(), cfg.grid.x_min);
}

TEST(Config, OutputDirPrecedence) {
  const auto cfg = parse_config_text(R"({"model": {"family": "pareto", "c": 1, "alpha": 2}, "output": {"dir": "cfg"}})");
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(resolve_output_dir(cfg), fs::path("cfg"));
  ::setenv(kOutputDirEnv, "env", 1);
  EXPECT_EQ(resolve_output_dir(cfg), fs::path("env"));
  EXPECT_EQ(resolve_output_dir(cfg, std::string("flag")), fs::path("flag"));
  ::unsetenv(kOutputDirEnv);
}

TEST(Cli, InvalidConfigExitsWithCode2) {
  TempDir tmp;
  const auto r = run_cli(std::string("approx '") + SUBEXP_CONFIG_DIR + "/invalid_alpha.json' -o '" +
                             (tmp.path() / "out").string() + "'",
                         tmp.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model.alpha"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(tmp.path() / "out" / "approx.csv"));
}

TEST(Cli, MissingConfigOrSubcommandExitsWithCode2) {
  TempDir tmp;
  EXPECT_EQ(run_cli("approx '" + (tmp.path() / "nope.json").string() + "'", tmp.path()).code, 2);
  EXPECT_EQ(run_cli("", tmp.path()).code, 2);
  EXPECT_EQ(run_cli("--help", tmp.path()).code, 0);
}

TEST(Cli, DeterministicOneApproxColumns) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "det1.json", R"({
    "model": {"family": "weibull", "beta": 0.5},
    "count": {"family": "deterministic", "n": 1},
    "lattice": {"step": 0.05},
    "grid": {"x_min": 10.0, "x_max": 300.0}
  })");
  const fs::path out = tmp.path() / "out";
  const auto r = run_cli("approx '" + cfg.string() + "' -o '" + out.string() + "'", tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(out / "approx.csv");
  ASSERT_GT(rows.size(), 10u);
  std::ostringstream header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header << (i ? "," : "") << rows[0][i];
  EXPECT_EQ(header.str(), kApproxColumns);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 6u);
    EXPECT_EQ(rows[i][3], rows[i][4]) << "row " << i;
    const double x = std::stod(rows[i][0]);
    const double lo = std::stod(rows[i][1]), hi = std::stod(rows[i][2]);
    EXPECT_LE(lo, WeibullModel(0.5).tail(x) * (1 + 1e-12));
    EXPECT_GE(hi, WeibullModel(0.5).tail(x) * (1 - 1e-12));
  }
  EXPECT_TRUE(fs::exists(out / "approx.json"));
  EXPECT_TRUE(fs::exists(out / "config.json"));
}

TEST(Cli, GeometricParetoResidualNearTarget) {
  TempDir tmp;
  const fs::path out = tmp.path() / "out";
  const auto r = run_cli(std::string("approx '") + SUBEXP_CONFIG_DIR + "/pareto_geometric_approx.json' -o '" +
                             out.string() + "'",
                         tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(out / "approx.csv");
  const double residual = std::stod(rows.back()[5]);
  EXPECT_NEAR(residual, 4.0, 0.4);
  EXPECT_NE(r.out.find("CONVERGES"), std::string::npos) << r.out;
}

TEST(Cli, StudyIsDeterministic) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "study.json", kSmallStudy);
  const fs::path a = tmp.path() / "a", b = tmp.path() / "b";
  ASSERT_EQ(run_cli("study '" + cfg.string() + "' -o '" + a.string() + "'", tmp.path()).code, 0);
  ASSERT_EQ(run_cli("study '" + cfg.string() + "' -o '" + b.string() + "'", tmp.path()).code, 0);
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 10);
  EXPECT_TRUE(fs::exists(a / "study_summary.csv"));
  EXPECT_TRUE(fs::exists(a / "study_summary.json"));
  EXPECT_TRUE(fs::exists(a / "study" / "compound_residual.csv"));
  EXPECT_TRUE(fs::exists(a / "study" / "local_subexp_ratio_t_0.5.csv"));
}

TEST(Cli, EnvironmentOverridesConfigDirAndFlagOverridesEnvironment) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "diag.json", R"({
    "model": {"family": "pareto", "c": 1.0, "alpha": 2.0},
    "lattice": {"step": 0.1},
    "grid": {"x_min": 10.0, "x_max": 100.0},
    "diagnostics": {"A_values": [5.0]},
    "output": {"dir": ")" + (tmp.path() / "from_config").string() + R"("}
  })");
  const fs::path env_dir = tmp.path() / "from_env";
  const std::string env = std::string(kOutputDirEnv) + "='" + env_dir.string() + "'";
  ASSERT_EQ(run_cli("diagnose '" + cfg.string() + "'", tmp.path(), env).code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "verdicts.csv"));
  EXPECT_TRUE(fs::exists(env_dir / "diagnose.json"));
  EXPECT_TRUE(fs::exists(env_dir / "curves" / "subexp_ratio.csv"));
  EXPECT_FALSE(fs::exists(tmp.path() / "from_config"));
  // the copied config reparses to the same experiment
  const auto copied = load_config((env_dir / "config.json").string());
  EXPECT_EQ(copied.model.label(), ParetoModel(1.0, 2.0).label());

  const fs::path flag_dir = tmp.path() / "from_flag";
  ASSERT_EQ(run_cli("diagnose '" + cfg.string() + "' -o '" + flag_dir.string() + "'", tmp.path(), env).code, 0);
  EXPECT_TRUE(fs::exists(flag_dir / "verdicts.csv"));
}

TEST(Cli, SimulateWritesEstimates) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "sim.json", R"({
    "model": {"family": "pareto", "c": 1.0, "alpha": 2.0},
    "count": {"family": "geometric", "rho": 0.5},
    "grid": {"x_min": 10.0, "x_max": 1000.0},
    "montecarlo": {"n_samples": 20000, "seed": 5}
  })");
  const fs::path out = tmp.path() / "out";
  const auto r = run_cli("simulate '" + cfg.string() + "' -o '" + out.string() + "'", tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(out / "simulate.csv");
  ASSERT_GE(rows.size(), 2u);
  std::ostringstream header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header << (i ? "," : "") << rows[0][i];
  EXPECT_EQ(header.str(), kSimulationColumns);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].back(), "5");
    EXPECT_GE(std::stod(rows[i][6]) * 20000, 100.0);
  }
}

TEST(Cli, SimulateWithoutSeedIsConfigError) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "sim.json", R"({
    "model": {"family": "pareto", "c": 1.0, "alpha": 2.0},
    "montecarlo": {"n_samples": 20000}
  })");
  const auto r = run_cli("simulate '" + cfg.string() + "' -o '" + (tmp.path() / "out").string() + "'", tmp.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("montecarlo.seed"), std::string::npos) << r.err;
}

TEST(Cli, DiagnosePrintsVerdictTable) {
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), "diag.json", kSmallStudy);
  const fs::path out = tmp.path() / "out";
  const auto r = run_cli("diagnose '" + cfg.string() + "' -o '" + out.string() + "'", tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string table = slurp(out / "verdicts.txt");
  EXPECT_NE(r.out.find(table), std::string::npos);
  std::istringstream in(table);
  std::string title, header;
  std::getline(in, title);
  std::getline(in, header);
  EXPECT_EQ(header.rfind("curve", 0), 0u);
  EXPECT_NE(header.find("verdict"), std::string::npos);
  EXPECT_NE(table.find("subexp_ratio"), std::string::npos);
  EXPECT_NE(table.find("\nS2 "), std::string::npos);
}
