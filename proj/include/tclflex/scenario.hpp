#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tclflex/etp.hpp"
#include "tclflex/markov.hpp"
#include "tclflex/reachhold.hpp"

namespace tclflex {

struct ValidationSettings {
  std::vector<double> hold_hours{2.0, 4.0, 8.0};
  std::uint64_t selection_seed = 0;
  std::size_t settle_steps = 240;
  double tolerance_fraction = 0.05;
};

struct ScenarioConfig {
  FleetSpec fleet;
  double grid_t_min = 18.0;
  double grid_t_max = 24.0;
  std::size_t bins_per_mode = 40;
  RegimeSpec regime;
  std::size_t horizon = 720;
  std::size_t p_hold_count = 50;
  std::vector<double> p_hold_kw;  // explicit grid; overrides p_hold_count
  std::vector<std::size_t> t_hold_steps;
  EstimationSettings estimation;
  std::vector<Method> methods{Method::inner, Method::outer};
  std::size_t exact_max_variables = 1600;
  std::size_t condition_horizon = 480;
  std::vector<double> sweep_setpoints{21.0, 21.5, 22.0};
  double precool_start = 19.0;
  ValidationSettings validation;
  std::vector<std::filesystem::path> aggregate_inputs;
  std::filesystem::path output_dir = "out";

  BinGrid grid() const { return BinGrid(grid_t_min, grid_t_max, bins_per_mode); }
  double p_on_kw() const {
    return static_cast<double>(fleet.n_units) * fleet.nominal.p_rate;
  }
  bool wants(Method m) const;
};

// Built-in configuration, seeds included.
nlohmann::json default_config_json();

// Merges `user` over the defaults. Throws InvalidConfiguration on unknown
// keys or when any of estimation.seed, fleet.seed, validation.selection_seed
// is missing from `user` (and require_seeds is set).
nlohmann::json merge_config(const nlohmann::json& user, bool require_seeds = true);

// Throws InvalidConfiguration on malformed values or a deadband outside the
// grid.
ScenarioConfig parse_config(const nlohmann::json& merged);

// Sets every seed to `seed`.
void override_seeds(nlohmann::json& merged, std::uint64_t seed);

}  // namespace tclflex
