#include <iostream>

#include <CLI11.hpp>

#include "tclflex/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Reach-and-hold flexibility of thermostatically controlled loads"};
  app.set_version_flag("--version", "tclflex 0.1.0");

  tclflex::cli::Options options;
  std::string config, out, methods, preset;
  std::uint64_t seed = 0;

  app.add_option("subcommand", options.subcommand,
                 "build-model | reachhold | aggregate | validate | sweep-setpoint | "
                 "sweep-precool | selfcheck");
  auto* config_opt = app.add_option("--config", config, "JSON scenario file");
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* methods_opt = app.add_option("--methods", methods, "comma list of inner,outer,exact");
  auto* preset_opt = app.add_option("--preset", preset, "fig2 | fig4 | fig5 | fig6 | fig7");
  auto* seed_opt = app.add_option("--seed-override", seed, "replace every seed in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tclflex::cli::kConfigError;
  }

  if (*config_opt) options.config = config;
  if (*out_opt) options.out = out;
  if (*methods_opt) options.methods = methods;
  if (*preset_opt) options.preset = preset;
  if (*seed_opt) options.seed_override = seed;
  if (options.subcommand.empty() && !options.preset) {
    std::cerr << app.help();
    return tclflex::cli::kConfigError;
  }
  return tclflex::cli::run(options, std::cout, std::cerr);
}
