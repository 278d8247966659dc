#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace tclflex::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kValidationDegraded = 4,
};

struct Options {
  // build-model, reachhold, aggregate, validate, sweep-setpoint,
  // sweep-precool or selfcheck; may be empty when a preset names it.
  std::string subcommand;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> methods;  // comma-separated
  std::optional<std::string> preset;   // fig2, fig4, fig5, fig6, fig7
  std::optional<std::uint64_t> seed_override;
};

// Runs one scenario and writes its artifacts. Progress and summaries go to
// `out`, diagnostics to `err`. Without --config the built-in defaults apply.
int run(const Options& options, std::ostream& out, std::ostream& err);

}  // namespace tclflex::cli
