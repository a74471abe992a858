#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "subexp/commands.hpp"

namespace {

using Command = int (*)(const subexp::ExperimentConfig&, const std::filesystem::path&, std::ostream&);

int run(Command cmd, const std::string& config_path, const std::string& out_override) {
  try {
    const auto cfg = subexp::load_config(config_path);
    const auto dir = subexp::resolve_output_dir(
        cfg, out_override.empty() ? std::nullopt : std::optional<std::string>(out_override));
    return cmd(cfg, dir, std::cout);
  } catch (const subexp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return subexp::kExitConfig;
  } catch (const subexp::ResourceError& e) {
    std::cerr << "resource budget exceeded: " << e.what() << '\n';
    return subexp::kExitResource;
  } catch (const subexp::NumericalError& e) {
    std::cerr << "numerical quality failure: " << e.what() << '\n';
    return subexp::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return subexp::kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound heavy-tail numerics: lattice tails, second-order expansions, class diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  Command chosen = nullptr;

  auto add = [&](const char* name, const char* help, Command cmd) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", out_dir, "output directory (overrides $SUBEXP_OUTPUT_DIR and the config)");
    sub->callback([&chosen, cmd] { chosen = cmd; });
  };
  add("approx", "exact compound tail bracket against first- and second-order approximations", subexp::cmd_approx);
  add("diagnose", "class-membership diagnostics and verdicts", subexp::cmd_diagnose);
  add("study", "diagnostics at step h and h/2 with a verdict-stability summary", subexp::cmd_study);
  add("simulate", "Monte Carlo estimates of the compound tail", subexp::cmd_simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : subexp::kExitConfig;
  }
  return run(chosen, config_path, out_dir);
}
