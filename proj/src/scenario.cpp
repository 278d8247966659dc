#include "tclflex/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "tclflex/errors.hpp"

namespace tclflex {

using nlohmann::json;

namespace {

void reject_unknown(const json& user, const json& reference, const std::string& path) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw InvalidConfiguration("unknown config key '" + where + "'");
    if (reference[key].is_object()) {
      if (!value.is_object()) throw InvalidConfiguration("config key '" + where + "' must be an object");
      reject_unknown(value, reference[key], where);
    }
  }
}

bool has_seed(const json& user, const char* section) {
  return user.is_object() && user.contains(section) && user[section].is_object() &&
         user[section].contains(section == std::string("validation") ? "selection_seed" : "seed");
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfiguration("config value '" + section + key + "': " + e.what());
  }
}

double positive(double v, const std::string& name) {
  if (!std::isfinite(v) || v <= 0.0) throw InvalidConfiguration(name + " must be positive");
  return v;
}

}  // namespace

bool ScenarioConfig::wants(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

json default_config_json() {
  const TclParams p;
  return json{
      {"tcl",
       {{"c_air", p.c_air},
        {"c_mass", p.c_mass},
        {"ua", p.ua},
        {"hm", p.hm},
        {"q_on", p.q_on},
        {"q_off", p.q_off},
        {"q_mass", p.q_mass},
        {"p_rate", p.p_rate}}},
      {"fleet", {{"n_units", 1000}, {"heterogeneity", 0.1}, {"seed", 11}}},
      {"grid", {{"t_min", 18.0}, {"t_max", 24.0}, {"bins_per_mode", 40}}},
      {"dt_minutes", 1.0},
      {"t_set", 20.0},
      {"t_set_new", 22.0},
      {"deadband", 1.0},
      {"t_amb", 32.0},
      {"horizon_steps", 720},
      {"p_hold_count", 50},
      {"p_hold_kw", json::array()},
      {"t_hold_steps",
       {1, 2, 5, 10, 15, 20, 30, 45, 60, 90, 120, 180, 240, 300, 360, 420, 480}},
      {"estimation", {{"samples_per_bin", 4000}, {"seed", 1}}},
      {"methods", {"inner", "outer"}},
      {"exact_max_variables", 1600},
      {"condition_horizon", 480},
      {"sweep", {{"t_set_new", {21.0, 21.5, 22.0}}}},
      {"precool", {{"t_start", 19.0}}},
      {"validation",
       {{"hold_hours", {2.0, 4.0, 8.0}},
        {"selection_seed", 5},
        {"settle_steps", 240},
        {"tolerance_fraction", 0.05}}},
      {"aggregate", {{"inputs", json::array()}}},
      {"output_dir", "out"},
  };
}

json merge_config(const json& user, bool require_seeds) {
  if (!user.is_object()) throw InvalidConfiguration("config must be a JSON object");
  const json defaults = default_config_json();
  reject_unknown(user, defaults, "");
  if (require_seeds) {
    for (const char* section : {"estimation", "fleet", "validation"}) {
      if (!has_seed(user, section)) {
        throw InvalidConfiguration(std::string("config must set an explicit ") + section +
                                   (std::string(section) == "validation" ? ".selection_seed"
                                                                         : ".seed"));
      }
    }
  }
  json merged = defaults;
  merged.merge_patch(user);
  return merged;
}

void override_seeds(json& merged, std::uint64_t seed) {
  merged["estimation"]["seed"] = seed;
  merged["fleet"]["seed"] = seed;
  merged["validation"]["selection_seed"] = seed;
}

ScenarioConfig parse_config(const json& j) {
  ScenarioConfig c;
  const auto& tcl = j.at("tcl");
  auto& p = c.fleet.nominal;
  p.c_air = get<double>(tcl, "c_air", "tcl.");
  p.c_mass = get<double>(tcl, "c_mass", "tcl.");
  p.ua = get<double>(tcl, "ua", "tcl.");
  p.hm = get<double>(tcl, "hm", "tcl.");
  p.q_on = get<double>(tcl, "q_on", "tcl.");
  p.q_off = get<double>(tcl, "q_off", "tcl.");
  p.q_mass = get<double>(tcl, "q_mass", "tcl.");
  p.p_rate = get<double>(tcl, "p_rate", "tcl.");

  const auto& fleet = j.at("fleet");
  c.fleet.n_units = get<std::size_t>(fleet, "n_units", "fleet.");
  c.fleet.heterogeneity = Heterogeneity::uniform(get<double>(fleet, "heterogeneity", "fleet."));
  c.fleet.seed = get<std::uint64_t>(fleet, "seed", "fleet.");

  const auto& grid = j.at("grid");
  c.grid_t_min = get<double>(grid, "t_min", "grid.");
  c.grid_t_max = get<double>(grid, "t_max", "grid.");
  c.bins_per_mode = get<std::size_t>(grid, "bins_per_mode", "grid.");

  c.regime.dt = std::chrono::duration<double, std::ratio<60>>(
      positive(get<double>(j, "dt_minutes", ""), "dt_minutes"));
  c.regime.t_set = get<double>(j, "t_set", "");
  c.regime.t_set_new = get<double>(j, "t_set_new", "");
  c.regime.deadband = positive(get<double>(j, "deadband", ""), "deadband");
  c.regime.t_amb = get<double>(j, "t_amb", "");
  c.fleet.deadband = c.regime.deadband;
  c.fleet.t_amb = c.regime.t_amb;
  c.fleet.initial_setpoint = c.regime.t_set;

  c.horizon = get<std::size_t>(j, "horizon_steps", "");
  if (c.horizon < 1) throw InvalidConfiguration("horizon_steps must be >= 1");
  c.p_hold_count = get<std::size_t>(j, "p_hold_count", "");
  c.p_hold_kw = get<std::vector<double>>(j, "p_hold_kw", "");
  c.t_hold_steps = get<std::vector<std::size_t>>(j, "t_hold_steps", "");
  std::sort(c.t_hold_steps.begin(), c.t_hold_steps.end());
  c.t_hold_steps.erase(std::unique(c.t_hold_steps.begin(), c.t_hold_steps.end()),
                       c.t_hold_steps.end());
  if (std::count(c.t_hold_steps.begin(), c.t_hold_steps.end(), 0)) {
    throw InvalidConfiguration("t_hold_steps entries must be >= 1");
  }

  const auto& est = j.at("estimation");
  c.estimation.samples_per_bin = get<std::size_t>(est, "samples_per_bin", "estimation.");
  c.estimation.seed = get<std::uint64_t>(est, "seed", "estimation.");

  c.methods.clear();
  for (const auto& m : get<std::vector<std::string>>(j, "methods", "")) {
    try {
      c.methods.push_back(parse_method(m));
    } catch (const InvalidInput& e) {
      throw InvalidConfiguration(e.what());
    }
  }
  c.exact_max_variables = get<std::size_t>(j, "exact_max_variables", "");
  c.condition_horizon = get<std::size_t>(j, "condition_horizon", "");
  c.sweep_setpoints = get<std::vector<double>>(j.at("sweep"), "t_set_new", "sweep.");
  c.precool_start = get<double>(j.at("precool"), "t_start", "precool.");

  const auto& val = j.at("validation");
  c.validation.hold_hours = get<std::vector<double>>(val, "hold_hours", "validation.");
  c.validation.selection_seed = get<std::uint64_t>(val, "selection_seed", "validation.");
  c.validation.settle_steps = get<std::size_t>(val, "settle_steps", "validation.");
  c.validation.tolerance_fraction = get<double>(val, "tolerance_fraction", "validation.");
  for (const auto& s : get<std::vector<std::string>>(j.at("aggregate"), "inputs", "aggregate.")) {
    c.aggregate_inputs.emplace_back(s);
  }
  c.output_dir = get<std::string>(j, "output_dir", "");

  try {
    p.validate();
    c.fleet.validate();
    const BinGrid g = c.grid();
    g.require_band(c.regime.t_set, c.regime.deadband);
    g.require_band(c.regime.t_set_new, c.regime.deadband);
    g.require_band(c.precool_start, c.regime.deadband);
    for (const double s : c.sweep_setpoints) g.require_band(s, c.regime.deadband);
  } catch (const InvalidInput& e) {
    throw InvalidConfiguration(e.what());
  }
  if (c.estimation.samples_per_bin < 1000) {
    throw InvalidConfiguration("estimation.samples_per_bin must be >= 1000");
  }
  for (const double h : c.validation.hold_hours) positive(h, "validation.hold_hours");
  return c;
}

}  // namespace tclflex
