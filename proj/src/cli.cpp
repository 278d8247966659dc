#include "tclflex/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tclflex/aggregation.hpp"
#include "tclflex/errors.hpp"
#include "tclflex/io.hpp"
#include "tclflex/reachhold.hpp"
#include "tclflex/scenario.hpp"
#include "tclflex/validation.hpp"

namespace tclflex::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Context {
  ScenarioConfig config;
  fs::path out_dir;
  std::string prefix;
  std::ostream& out;
  std::ostream& err;

  fs::path file(const std::string& name) const { return out_dir / (prefix + name); }
};

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> table{
      {"fig2", "build-model"},    {"fig4", "reachhold"},     {"fig5", "sweep-setpoint"},
      {"fig6", "sweep-precool"},  {"fig7", "validate"},
  };
  return table;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string describe_state(const BinGrid& grid, std::size_t state) {
  const std::size_t bin = state % grid.bins_per_mode();
  std::ostringstream s;
  s << (grid.is_on_state(state) ? "ON" : "OFF") << " [" << format_number(grid.lower_edge(bin))
    << ", " << format_number(grid.upper_edge(bin)) << ")";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) { io::write_file(path, text); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <class Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream s;
  writer(s);
  write_text(path, s.str());
}

json regime_json(const ScenarioConfig& c, const RegimeSpec& r) {
  return json{{"t_set", r.t_set},
              {"t_set_new", r.t_set_new},
              {"setpoint_change", r.setpoint_change()},
              {"deadband", r.deadband},
              {"t_amb", r.t_amb},
              {"dt_minutes", r.dt.count() * 60.0},
              {"grid",
               {{"t_min", c.grid_t_min}, {"t_max", c.grid_t_max}, {"bins_per_mode", c.bins_per_mode}}}};
}

ReachHoldModel model_for(const ScenarioConfig& c, const RegimeSpec& regime, bool squeezed) {
  return build_model(c.fleet.nominal, c.grid(), regime, c.p_on_kw(), c.estimation, squeezed);
}

std::vector<double> p_grid_for(const ScenarioConfig& c, double p_nom) {
  if (c.p_hold_kw.empty()) return default_p_grid(p_nom, c.p_hold_count);
  std::vector<double> grid;
  for (const double p : c.p_hold_kw) {
    if (p >= 0.0 && p <= p_nom) grid.push_back(p);
  }
  return grid;
}

// ---- build-model ----------------------------------------------------------

int build_model_cmd(Context& ctx) {
  const auto& c = ctx.config;
  const bool squeezed = c.wants(Method::outer);
  const auto model = model_for(c, c.regime, squeezed);
  const auto grid = c.grid();

  write_with(ctx.file("A.csv"), [&](auto& s) { write_transition_matrix_csv(s, model.nominal); });
  write_with(ctx.file("A_a.csv"), [&](auto& s) { write_transition_matrix_csv(s, model.actuated); });
  if (model.squeezed) {
    write_with(ctx.file("A_out.csv"),
               [&](auto& s) { write_transition_matrix_csv(s, *model.squeezed); });
  }
  write_with(ctx.file("x0.csv"), [&](auto& s) {
    s << "state,mode,T_low,T_high,x0\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const std::size_t bin = i % grid.bins_per_mode();
      s << i << ',' << (grid.is_on_state(i) ? "ON" : "OFF") << ',' << io::exact(grid.lower_edge(bin))
        << ',' << io::exact(grid.upper_edge(bin)) << ',' << io::exact(model.x0()(static_cast<Eigen::Index>(i)))
        << '\n';
    }
  });

  // Half the population stepped at k = 0, Markov and micro side by side.
  const std::size_t horizon = c.horizon;
  const auto half = ControlPlan::proportional({0.5}, model.x0());
  const auto markov = markov_power_trace(model, half, horizon);
  Fleet fleet = initialize_from_distribution(sample_fleet(c.fleet), grid, model.x0(),
                                             c.validation.selection_seed);
  std::vector<std::size_t> order(fleet.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(c.validation.selection_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<SetpointChange> schedule;
  for (std::size_t i = 0; i < fleet.size() / 2; ++i) {
    schedule.push_back({0, order[i], c.regime.t_set_new});
  }
  const auto micro = simulate_fleet(
      fleet, {c.regime.t_amb, c.regime.deadband, c.regime.dt, horizon, false}, schedule);
  write_with(ctx.file("response_50pct.csv"),
             [&](auto& s) { write_paired_trace_csv(s, markov, micro.power_kw); });

  const double remark1 = model.output.c.dot(model.actuated.apply(model.x0()));
  json j{{"regime", regime_json(c, c.regime)},
         {"p_on_kw", model.p_on()},
         {"p_nom_kw", model.p_nom()},
         {"stationary",
          {{"unique", model.stationary.unique},
           {"residual", model.stationary.residual},
           {"iterations", model.stationary.iterations}}},
         {"max_column_error",
          {{"A", model.nominal.max_column_error()}, {"A_a", model.actuated.max_column_error()}}},
         {"c_on_A_a_x0_kw", remark1},
         {"samples_per_bin", c.estimation.samples_per_bin}};
  if (model.squeezed) j["max_column_error"]["A_out"] = model.squeezed->max_column_error();
  write_json(ctx.file("model.json"), j);

  ctx.out << "P_ON " << model.p_on() << " kW, P_nom " << model.p_nom() << " kW ("
          << model.p_nom() / model.p_on() << " of capacity)\n";
  ctx.out << "stationary residual " << model.stationary.residual
          << (model.stationary.unique ? "" : " (not unique)") << '\n';
  return kSuccess;
}

// ---- reachhold ------------------------------------------------------------

int reachhold_cmd(Context& ctx) {
  const auto& c = ctx.config;
  const auto grid = c.grid();
  const auto model = model_for(c, c.regime, c.wants(Method::outer));
  const std::size_t max_t = c.t_hold_steps.empty() ? 0 : c.t_hold_steps.back();
  const std::size_t horizon = std::max({c.horizon + 1, c.condition_horizon, max_t});
  const auto kernels = response_kernels(model, horizon);
  const auto response = proportional_response(kernels, model.x0(), model.p_on());
  const std::size_t n = grid.size();

  json sidecar{{"regime", regime_json(c, c.regime)},
               {"p_on_kw", model.p_on()},
               {"p_nom_kw", model.p_nom()},
               {"horizon_steps", c.horizon}};

  std::vector<std::size_t> t_grid;
  for (const auto t : c.t_hold_steps) {
    if (t <= c.horizon) t_grid.push_back(t);
  }

  if (c.wants(Method::inner)) {
    const auto set = inner_boundary(p_grid_for(c, model.p_nom()), response, c.horizon, c.regime.dt);
    write_with(ctx.file("inner.csv"), [&](auto& s) { write_reachhold_csv(s, set); });
    std::size_t limited = 0;
    for (const auto& p : set.boundary) limited += p.horizon_limited ? 1 : 0;
    json at_t = json::array();
    for (const auto t : t_grid) {
      at_t.push_back({{"t_hold_steps", t}, {"p_hold_kw", inner_value_at(t, response, c.horizon)}});
    }
    sidecar["inner"] = {{"points", set.boundary.size()},
                        {"horizon_limited_points", limited},
                        {"monotone", set.monotone()},
                        {"value_at_t", at_t}};
    ctx.out << "inner: " << set.boundary.size() << " points, " << limited
            << " horizon-limited\n";
  }

  if (c.wants(Method::outer)) {
    const Vector x_out = squeezed_start(grid, c.regime.t_set, c.regime.deadband);
    const auto report = check_outer_condition(kernels, x_out, c.condition_horizon);
    const auto support = reachable_support(*model.squeezed, x_out);
    ReachHoldSet set;
    set.method = Method::outer;
    set.dt = c.regime.dt;
    set.p_nom_kw = model.p_nom();
    set.p_on_kw = model.p_on();
    set.verified = report.holds;
    json rows = json::array();
    for (const auto t : t_grid) {
      const auto reach = solve_outer(t, kernels, support);
      double best = reach.p_hold_kw;
      json row{{"t_hold_steps", t}, {"reachable_support_kw", reach.p_hold_kw}};
      if (t * n <= kExactVariableCap) {
        const auto full = solve_outer(t, kernels);
        row["full_support_kw"] = full.p_hold_kw;
        best = std::min(best, full.p_hold_kw);
      }
      set.boundary.push_back({best, t, Method::outer, false});
      rows.push_back(row);
    }
    set.sort();
    write_with(ctx.file("outer.csv"), [&](auto& s) { write_reachhold_csv(s, set); });
    json support_bins = json::array();
    for (const auto s : support) support_bins.push_back(describe_state(grid, s));
    sidecar["outer"] = {{"status", report.holds ? "verified" : "unverified"},
                        {"x_out", describe_state(grid, static_cast<std::size_t>(
                                                           std::max_element(x_out.data(), x_out.data() + x_out.size()) -
                                                           x_out.data()))},
                        {"reachable_support", support_bins},
                        {"monotone", set.monotone()},
                        {"values", rows}};
    sidecar["condition"] = {{"holds", report.holds},
                            {"horizon", report.horizon},
                            {"worst_margin_kw", report.worst_margin_kw},
                            {"worst_margin_fraction_of_p_on", report.worst_margin_kw / model.p_on()},
                            {"worst_step", report.worst_step},
                            {"worst_state", describe_state(grid, report.worst_bin)},
                            {"violating_steps", report.violating_steps}};
    ctx.out << "outer: " << set.boundary.size() << " points, "
            << (report.holds ? "verified" : "unverified") << " (condition margin "
            << report.worst_margin_kw / model.p_on() << " P_ON at step " << report.worst_step
            << ", " << report.violating_steps << " of " << report.horizon
            << " steps violate)\n";
  }

  if (c.wants(Method::exact)) {
    ReachHoldSet set;
    set.method = Method::exact;
    set.dt = c.regime.dt;
    set.p_nom_kw = model.p_nom();
    set.p_on_kw = model.p_on();
    json rows = json::array();
    json skipped = json::array();
    const std::size_t cap = std::min(c.exact_max_variables, kExactVariableCap);
    for (const auto t : t_grid) {
      if (t * n > cap) {
        skipped.push_back(t);
        continue;
      }
      const auto exact = solve_exact(t, kernels, model.x0(), model.nominal);
      set.boundary.push_back({exact.p_hold_kw, t, Method::exact, false});
      rows.push_back({{"t_hold_steps", t},
                      {"p_hold_kw", exact.p_hold_kw},
                      {"lp_iterations", exact.lp.iterations},
                      {"max_constraint_violation", exact.lp.max_constraint_violation}});
    }
    set.sort();
    write_with(ctx.file("exact.csv"), [&](auto& s) { write_reachhold_csv(s, set); });
    sidecar["exact"] = {{"values", rows}, {"skipped_t_hold_steps", skipped}};
    ctx.out << "exact: " << set.boundary.size() << " points, " << skipped.size()
            << " skipped above the size cap\n";
  }

  write_json(ctx.file("reachhold.json"), sidecar);
  return kSuccess;
}

// ---- aggregate ------------------------------------------------------------

int aggregate_cmd(Context& ctx) {
  const auto& c = ctx.config;
  if (c.aggregate_inputs.size() < 2) {
    throw InvalidConfiguration("aggregate needs at least two entries in aggregate.inputs");
  }
  std::vector<ReachHoldSet> sets;
  for (const auto& path : c.aggregate_inputs) {
    std::istringstream in(io::read_file(path));
    sets.push_back(read_reachhold_csv(in));
  }
  const auto combined = combine_all(sets);
  write_with(ctx.file("combined.csv"), [&](auto& s) { write_combined_csv(s, combined); });
  json inputs = json::array();
  for (const auto& p : c.aggregate_inputs) inputs.push_back(p.string());
  json counts;
  for (const auto mode : {CombineMode::exclusive, CombineMode::simultaneous,
                          CombineMode::consecutive, CombineMode::union_}) {
    counts[to_string(mode)] = combined.frontier(mode).points.size();
  }
  write_json(ctx.file("combined.json"), {{"inputs", inputs},
                                          {"dt_minutes", sets.front().dt.count() * 60.0},
                                          {"points", counts},
                                          {"note", "sets beyond the second are left-folded"}});
  ctx.out << "combined " << sets.size() << " sets; union frontier has "
          << combined.union_frontier.points.size() << " points\n";
  return kSuccess;
}

// ---- validate -------------------------------------------------------------

int validate_cmd(Context& ctx) {
  const auto& c = ctx.config;
  const auto grid = c.grid();
  const auto model = model_for(c, c.regime, false);
  const auto kernels = response_kernels(model, c.horizon + 1);
  const auto response = proportional_response(kernels, model.x0(), model.p_on());

  const Fleet fleet = settle_fleet(sample_fleet(c.fleet), c.regime.t_amb, c.regime.deadband,
                                   c.regime.dt, c.validation.settle_steps);
  const auto baseline =
      simulate_fleet(fleet, {c.regime.t_amb, c.regime.deadband, c.regime.dt, c.horizon, false});
  const double reference =
      std::accumulate(baseline.power_kw.begin(), baseline.power_kw.end(), 0.0) /
      static_cast<double>(baseline.power_kw.size());
  const double tolerance = c.validation.tolerance_fraction * model.p_on();

  json blocks = json::array();
  bool degraded = false;
  for (const double hours : c.validation.hold_hours) {
    const auto target = static_cast<std::size_t>(std::lround(hours / c.regime.dt.count()));
    if (target > c.horizon) {
      throw InvalidConfiguration("hold of " + format_number(hours) + " h exceeds horizon_steps");
    }
    const double p_hold = inner_value_at(target, response, c.horizon);
    const auto point = inner_point(p_hold, response, model.x0(), c.horizon);
    const auto plan = discretize_plan(point.plan, c.fleet.n_units);
    const auto micro = apply_plan_micro(
        fleet, plan, grid,
        {c.regime.t_amb, c.regime.deadband, c.regime.dt, c.horizon, c.regime.t_set_new,
         c.validation.selection_seed});
    const auto markov = markov_power_trace(model, point.plan, c.horizon);
    const auto cmp = compare_traces(markov, micro.power_kw, model.p_on(), reference, p_hold,
                                    point.t_hold, tolerance);
    write_with(ctx.file("validate_" + format_number(hours) + "h.csv"),
               [&](auto& s) { write_paired_trace_csv(s, markov, micro.power_kw); });
    degraded = degraded || micro.degraded();
    blocks.push_back({{"hold_hours", hours},
                      {"p_hold_kw", p_hold},
                      {"t_hold_steps", point.t_hold},
                      {"rmse", cmp.rmse},
                      {"max_abs_dev", cmp.max_abs_dev},
                      {"hold_satisfied_fraction", cmp.hold_satisfied_fraction},
                      {"shortfall_events", micro.shortfalls.size()},
                      {"requested_actuations", micro.requested},
                      {"delivered_actuations", micro.delivered},
                      {"degraded", micro.degraded()}});
    ctx.out << format_number(hours) << " h block: P_hold " << p_hold << " kW, T_hold "
            << point.t_hold << " steps, hold satisfied " << cmp.hold_satisfied_fraction
            << ", rmse " << cmp.rmse << (micro.degraded() ? " [degraded]" : "") << '\n';
  }
  write_json(ctx.file("validation.json"),
             {{"regime", regime_json(c, c.regime)},
              {"n_units", c.fleet.n_units},
              {"reference_kw", reference},
              {"p_nom_kw", model.p_nom()},
              {"tolerance_kw", tolerance},
              {"carry_rule", "e[k+1] = U[k] + e[k] - floor(U[k] + e[k])"},
              {"blocks", blocks}});
  if (degraded) {
    ctx.err << "validation degraded: more than 5% of requested actuations were not delivered\n";
    return kValidationDegraded;
  }
  return kSuccess;
}

// ---- sweeps ---------------------------------------------------------------

int sweep_setpoint_cmd(Context& ctx) {
  const auto& c = ctx.config;
  std::vector<double> setpoints = c.sweep_setpoints;
  std::sort(setpoints.begin(), setpoints.end());
  std::vector<ReachHoldSet> sets;
  std::vector<double> p_grid;
  json regimes = json::array();
  for (const double s : setpoints) {
    RegimeSpec regime = c.regime;
    regime.t_set_new = s;
    const auto model = model_for(c, regime, false);
    const auto kernels = response_kernels(model, c.horizon + 1);
    const auto response = proportional_response(kernels, model.x0(), model.p_on());
    if (p_grid.empty()) p_grid = p_grid_for(c, model.p_nom());
    sets.push_back(inner_boundary(p_grid, response, c.horizon, c.regime.dt));
    write_with(ctx.file("sweep_" + format_number(s) + ".csv"),
               [&](auto& out) { write_reachhold_csv(out, sets.back()); });
    regimes.push_back({{"t_set_new", s}, {"p_nom_kw", model.p_nom()}});
  }
  bool ordered = true;
  for (std::size_t i = 1; i < sets.size(); ++i) {
    for (const double p : p_grid) {
      if (query_t_at_p(sets[i], p) < query_t_at_p(sets[i - 1], p)) ordered = false;
    }
  }
  write_json(ctx.file("sweep.json"), {{"regime", regime_json(c, c.regime)},
                                       {"regimes", regimes},
                                       {"t_hold_monotone_in_setpoint", ordered}});
  ctx.out << "setpoint sweep over " << sets.size() << " regimes; T_hold ordering "
          << (ordered ? "monotone" : "NOT monotone") << '\n';
  return kSuccess;
}

int sweep_precool_cmd(Context& ctx) {
  const auto& c = ctx.config;
  RegimeSpec pre = c.regime;
  pre.t_set = c.precool_start;
  const auto base_model = model_for(c, c.regime, false);
  const auto pre_model = model_for(c, pre, false);
  auto grid = p_grid_for(c, base_model.p_nom());
  const auto pre_grid = p_grid_for(c, pre_model.p_nom());
  grid.insert(grid.end(), pre_grid.begin(), pre_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto set_for = [&](const ReachHoldModel& m) {
    const auto kernels = response_kernels(m, c.horizon + 1);
    const auto response = proportional_response(kernels, m.x0(), m.p_on());
    std::vector<double> g;
    for (const double p : grid) {
      if (p <= m.p_nom()) g.push_back(p);
    }
    return inner_boundary(g, response, c.horizon, c.regime.dt);
  };
  const auto base = set_for(base_model);
  const auto precooled = set_for(pre_model);
  write_with(ctx.file("precool_baseline.csv"), [&](auto& s) { write_reachhold_csv(s, base); });
  write_with(ctx.file("precool_precooled.csv"), [&](auto& s) { write_reachhold_csv(s, precooled); });

  bool dominates = true;
  for (const auto& pt : base.boundary) {
    if (query_t_at_p(precooled, pt.p_hold_kw) < pt.t_hold_steps) dominates = false;
  }
  write_json(ctx.file("precool.json"), {{"regime", regime_json(c, c.regime)},
                                         {"precool_start", c.precool_start},
                                         {"p_nom_baseline_kw", base_model.p_nom()},
                                         {"p_nom_precooled_kw", pre_model.p_nom()},
                                         {"precooled_dominates", dominates}});
  ctx.out << "P_nom baseline " << base_model.p_nom() << " kW, pre-cooled " << pre_model.p_nom()
          << " kW; pre-cooled frontier " << (dominates ? "dominates" : "does NOT dominate")
          << '\n';
  return kSuccess;
}

// ---- selfcheck ------------------------------------------------------------

int selfcheck_cmd(Context& ctx) {
  const auto& c = ctx.config;
  const auto grid = c.grid();
  std::vector<std::pair<std::string, bool>> results;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    results.emplace_back(name, ok);
    ctx.out << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << '\n';
  };

  const auto model = model_for(c, c.regime, false);
  const double col = std::max(model.nominal.max_column_error(), model.actuated.max_column_error());
  check("column stochasticity", col <= TransitionMatrix::kColumnTolerance,
        "max column error " + format_number(col));
  check("stationarity", model.stationary.residual <= 1e-10,
        "residual " + format_number(model.stationary.residual));

  std::mt19937_64 rng(c.estimation.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto state = PopulationState::from_stationary(model.x0());
  double drift = 0.0;
  bool nonnegative = true;
  for (int k = 0; k < 200; ++k) {
    Vector u(state.x.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = 0.05 * unit(rng) * state.x(i);
    state = step_population(state, u, model.nominal, model.actuated);
    drift = std::max(drift, std::abs(state.total_mass() - 1.0));
    nonnegative = nonnegative && state.x.minCoeff() >= 0.0 && state.x_a.minCoeff() >= 0.0;
  }
  check("mass conservation", drift <= 1e-9 && nonnegative, "max drift " + format_number(drift));

  const auto kernels = response_kernels(model, c.horizon + 1);
  const auto response = proportional_response(kernels, model.x0(), model.p_on());
  if (c.regime.setpoint_change() >= c.regime.deadband) {
    const double g1 = std::abs(response.actuated[1]);
    check("structural zero", g1 <= 1e-12 * model.p_on(),
          "|c A_a x0| = " + format_number(g1) + " kW");
  }
  const auto set =
      inner_boundary(p_grid_for(c, model.p_nom()), response, c.horizon, c.regime.dt);
  check("frontier monotone", set.monotone(), std::to_string(set.boundary.size()) + " points");

  const auto point = inner_point(0.5 * model.p_nom(), response, model.x0(), c.horizon);
  const auto dp = delta_p(point.plan, kernels, c.horizon);
  auto st = PopulationState::from_stationary(model.x0());
  double gap = 0.0;
  const Vector zero = Vector::Zero(model.x0().size());
  for (std::size_t k = 1; k <= c.horizon; ++k) {
    const Vector& u = k - 1 < point.plan.steps() ? point.plan.u[k - 1] : zero;
    st = step_population(st, u, model.nominal, model.actuated);
    const double direct = model.p_nom() - aggregate_power(st, model.output);
    gap = std::max(gap, std::abs(direct - dp(static_cast<Eigen::Index>(k))));
  }
  check("response kernels", gap <= 1e-9 * model.p_on(),
        "kernel vs state stepping gap " + format_number(gap) + " kW");

  const auto plan = discretize_plan(point.plan, c.fleet.n_units);
  double worst = 0.0;
  double target = 0.0;
  for (std::size_t k = 0; k < plan.steps(); ++k) {
    target += static_cast<double>(c.fleet.n_units) * point.plan.u[k].sum();
    worst = std::max(worst, std::abs(static_cast<double>(plan.cumulative(k)) - target));
  }
  check("unit-count fidelity", worst <= static_cast<double>(grid.size()),
        "max gap " + format_number(worst) + " units, bound " + std::to_string(grid.size()));

  const auto again = model_for(c, c.regime, false);
  const bool same_model = again.nominal.entries() == model.nominal.entries() &&
                          again.x0() == model.x0();
  const auto f1 = sample_fleet(c.fleet);
  const auto f2 = sample_fleet(c.fleet);
  bool same_fleet = f1.size() == f2.size();
  for (std::size_t u = 0; same_fleet && u < f1.size(); ++u) {
    same_fleet = f1.states[u].t_air == f2.states[u].t_air && f1.params[u].ua == f2.params[u].ua;
  }
  check("determinism", same_model && same_fleet, "repeat estimation and sampling");

  const bool all = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.second; });
  return all ? kSuccess : kNumericalFailure;
}

using Command = int (*)(Context&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"build-model", build_model_cmd},      {"reachhold", reachhold_cmd},
      {"aggregate", aggregate_cmd},          {"validate", validate_cmd},
      {"sweep-setpoint", sweep_setpoint_cmd}, {"sweep-precool", sweep_precool_cmd},
      {"selfcheck", selfcheck_cmd},
  };
  return table;
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    std::string subcommand = options.subcommand;
    std::string prefix;
    if (options.preset) {
      const auto it = presets().find(*options.preset);
      if (it == presets().end()) throw InvalidConfiguration("unknown preset '" + *options.preset + "'");
      if (!subcommand.empty() && subcommand != it->second) {
        throw InvalidConfiguration("preset " + *options.preset + " runs " + it->second +
                                   ", not " + subcommand);
      }
      subcommand = it->second;
      prefix = *options.preset + "_";
    }
    const auto command = commands().find(subcommand);
    if (command == commands().end()) {
      throw InvalidConfiguration("unknown subcommand '" + subcommand + "'");
    }

    json merged;
    fs::path base_dir = fs::current_path();
    if (options.config) {
      json user;
      try {
        user = json::parse(io::read_file(*options.config));
      } catch (const json::exception& e) {
        throw InvalidConfiguration("cannot parse " + options.config->string() + ": " + e.what());
      } catch (const InvalidInput& e) {
        throw InvalidConfiguration(e.what());
      }
      merged = merge_config(user);
      base_dir = options.config->parent_path();
    } else {
      merged = default_config_json();
    }
    if (options.seed_override) override_seeds(merged, *options.seed_override);
    if (options.methods) {
      json list = json::array();
      std::stringstream ss(*options.methods);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) list.push_back(item);
      }
      merged["methods"] = list;
    }
    if (options.out) merged["output_dir"] = options.out->string();

    ScenarioConfig config = parse_config(merged);
    json inputs = json::array();
    for (auto& p : config.aggregate_inputs) {
      if (p.is_relative()) p = fs::absolute(base_dir / p).lexically_normal();
      inputs.push_back(p.string());
    }
    // Echo resolved paths so a rerun from the copy finds the same files.
    merged["aggregate"]["inputs"] = inputs;
    Context ctx{std::move(config), {}, prefix, out, err};
    ctx.out_dir = ctx.config.output_dir;
    fs::create_directories(ctx.out_dir);
    write_json(ctx.file("effective_config.json"), merged);
    return command->second(ctx);
  } catch (const InvalidConfiguration& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const ConstraintViolation& e) {
    err << "constraint violation: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace tclflex::cli
