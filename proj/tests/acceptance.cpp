// Acceptance suite: one PASS/FAIL line per criterion, evaluated at the
// shipped defaults unless a criterion names its own instance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "tclflex/aggregation.hpp"
#include "tclflex/cli.hpp"
#include "tclflex/reachhold.hpp"
#include "tclflex/scenario.hpp"
#include "tclflex/validation.hpp"

using namespace tclflex;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
  std::vector<std::string> info;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const ScenarioConfig& defaults() {
  static const ScenarioConfig c = parse_config(default_config_json());
  return c;
}

struct DefaultModel {
  ReachHoldModel model = build_model(defaults().fleet.nominal, defaults().grid(), defaults().regime,
                                     defaults().p_on_kw(), defaults().estimation, true);
  Kernels kernels = response_kernels(model, std::max(defaults().horizon, defaults().condition_horizon) + 1);
  ProportionalResponse response = proportional_response(kernels, model.x0(), model.p_on());
};

const DefaultModel& default_model() {
  static const DefaultModel m;
  return m;
}

// Delta P against the unactuated fleet, by stepping (x, x_a).
std::vector<double> stepped_delta_p(const ReachHoldModel& m, const ControlPlan& plan,
                                    std::size_t horizon, std::size_t delay = 0) {
  auto s = PopulationState::from_stationary(m.x0());
  Vector free = m.x0();
  const Vector zero = Vector::Zero(m.x0().size());
  std::vector<double> out{0.0};
  for (std::size_t k = 1; k <= horizon; ++k) {
    const std::size_t n = k - 1;
    const Vector& u = n >= delay && n - delay < plan.steps() ? plan.u[n - delay] : zero;
    s = step_population(s, u, m.nominal, m.actuated);
    free = m.nominal.apply(free);
    out.push_back(m.output.c.dot(free) - aggregate_power(s, m.output));
  }
  return out;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------

Verdict sandwich() {
  const auto start = Clock::now();
  const auto& d = defaults();
  const double p_on = d.p_on_kw();
  const auto model =
      build_model(d.fleet.nominal, BinGrid(19.0, 23.0, 10), d.regime, p_on, d.estimation, true);
  const auto kernels = response_kernels(model, 121);
  const auto response = proportional_response(kernels, model.x0(), p_on);
  const Vector x_out = squeezed_start(model.grid, d.regime.t_set, d.regime.deadband);
  const auto support = reachable_support(*model.squeezed, x_out);
  Verdict v{true, "", {}};
  double worst = std::numeric_limits<double>::infinity();
  for (const std::size_t t : {5u, 10u, 20u, 40u}) {
    const double inner = inner_value_at(t, response, 120);
    const double exact = solve_exact(t, kernels, model.x0(), model.nominal).p_hold_kw;
    const double outer =
        std::min(solve_outer(t, kernels, support).p_hold_kw, solve_outer(t, kernels).p_hold_kw);
    const double slack = std::min(exact - inner, outer - exact);
    worst = std::min(worst, slack / p_on);
    v.pass = v.pass && inner <= exact + 1e-6 * p_on && exact <= outer + 1e-6 * p_on;
    v.info.push_back("T=" + std::to_string(t) + ": inner " + fixed(inner / p_on) + " <= exact " +
                     fixed(exact / p_on) + " <= outer " + fixed(outer / p_on) + " (P_ON units)");
  }
  const double secs = seconds_since(start);
  v.pass = v.pass && secs < 120.0;
  v.detail = "N=10, min ordering slack " + fmt("%.3g", worst) + " P_ON (tol 1e-6), " +
             fixed(secs, 1) + " s (< 120 s)";
  return v;
}

Verdict inner_feasibility() {
  const auto start = Clock::now();
  const auto& m = default_model();
  const double p_on = m.model.p_on();
  double worst = std::numeric_limits<double>::infinity();
  std::size_t checked_steps = 0;
  for (const double p : default_p_grid(m.model.p_nom(), 20)) {
    const auto pt = inner_point(p, m.response, m.model.x0(), defaults().horizon);
    const auto dp = stepped_delta_p(m.model, pt.plan, pt.t_hold);
    for (std::size_t k = 1; k <= pt.t_hold; ++k) {
      worst = std::min(worst, (dp[k] - p) / p_on);
      ++checked_steps;
    }
  }
  const double secs = seconds_since(start);
  return {worst >= -1e-9 && secs < 60.0,
          "20 P_hold points, " + std::to_string(checked_steps) +
              " held steps, min (dP - P_hold) = " + fmt("%.3g", worst) + " P_ON (>= -1e-9), " +
              fixed(secs, 1) + " s (< 60 s)",
          {}};
}

Verdict structural_zero() {
  const auto& m = default_model().model;
  const double value = std::abs(m.output.c.dot(m.actuated.apply(m.x0())));
  return {value <= 1e-12 * m.p_on(),
          "dT_set = " + fixed(defaults().regime.setpoint_change(), 1) + " C, |c_ON A_a x0| = " +
              fmt("%.3g", value / m.p_on()) + " P_ON (<= 1e-12)",
          {}};
}

Verdict outer_condition() {
  const auto& d = defaults();
  const auto& m = default_model();
  const Vector x_out = squeezed_start(m.model.grid, d.regime.t_set, d.regime.deadband);
  const auto report = check_outer_condition(m.kernels, x_out, d.condition_horizon);
  const auto bins = m.model.grid.bins_per_mode();
  const auto bin = report.worst_bin % bins;
  std::ostringstream where;
  where << (report.worst_bin >= bins ? "ON" : "OFF") << " bin " << bin << " ["
        << m.model.grid.lower_edge(bin) << ", " << m.model.grid.upper_edge(bin) << ")";
  return {report.holds,
          "m <= " + std::to_string(report.horizon) + ", min margin " +
              fmt("%.4g", report.worst_margin_kw / m.model.p_on()) + " P_ON at m=" +
              std::to_string(report.worst_step) + ", " + where.str() + "; " +
              std::to_string(report.violating_steps) + " violating steps; outer sets " +
              (report.holds ? "verified" : "flagged unverified"),
          {}};
}

struct ShapeCheck {
  double trough;
  double peak;
  bool ok;
};

// Drop to near zero inside the first hour, then a later peak above P_nom.
ShapeCheck shape(const std::vector<double>& trace, double p_on, double p_nom) {
  const auto low = std::min_element(trace.begin() + 1, trace.begin() + 61);
  const double peak = *std::max_element(low, trace.end());
  return {*low, peak, *low <= 0.05 * p_on && peak > p_nom};
}

Verdict markov_micro() {
  const auto start = Clock::now();
  const auto& d = defaults();
  const auto& m = default_model().model;
  const std::size_t horizon = 480;
  const double p_on = m.p_on();
  const auto plan = ControlPlan::proportional({1.0}, m.x0());
  const auto markov = markov_power_trace(m, plan, horizon);

  auto micro_for = [&](double spread) {
    FleetSpec spec = d.fleet;
    spec.heterogeneity = Heterogeneity::uniform(spread);
    const Fleet fleet =
        initialize_from_distribution(sample_fleet(spec), m.grid, m.x0(), d.validation.selection_seed);
    std::vector<SetpointChange> schedule;
    for (std::size_t u = 0; u < fleet.size(); ++u) schedule.push_back({0, u, d.regime.t_set_new});
    return simulate_fleet(fleet, {d.regime.t_amb, d.regime.deadband, d.regime.dt, horizon, false},
                          schedule)
        .power_kw;
  };
  const auto micro = micro_for(0.0);
  const auto cmp = compare_traces(markov, micro, p_on, 0.0, 0.0, 0, 0.0);
  const auto sm = shape(markov, p_on, m.p_nom());
  const auto su = shape(micro, p_on, m.p_nom());
  const double secs = seconds_since(start);

  Verdict v;
  v.pass = cmp.rmse <= 0.10 && sm.ok && su.ok && secs < 300.0;
  v.detail = "homogeneous 1000 units, 8 h: RMSE " + fixed(cmp.rmse) + " P_ON (<= 0.10); " +
             "Markov trough " + fixed(sm.trough / p_on) + " peak " + fixed(sm.peak / p_on) +
             ", micro trough " + fixed(su.trough / p_on) + " peak " + fixed(su.peak / p_on) +
             " vs P_nom " + fixed(m.p_nom() / p_on) + " (P_ON units); " + fixed(secs, 1) +
             " s (< 300 s)";
  const auto hetero = micro_for(d.fleet.heterogeneity.ua);
  const auto ch = compare_traces(markov, hetero, p_on, 0.0, 0.0, 0, 0.0);
  const auto sh = shape(hetero, p_on, m.p_nom());
  v.info.push_back("informational, 10% heterogeneous fleet: RMSE " + fixed(ch.rmse) + ", trough " +
                   fixed(sh.trough / p_on) + ", peak " + fixed(sh.peak / p_on));
  return v;
}

Verdict fig7() {
  const auto start = Clock::now();
  const auto& d = defaults();
  const auto& m = default_model();
  const double p_on = m.model.p_on();
  const Fleet fleet = settle_fleet(sample_fleet(d.fleet), d.regime.t_amb, d.regime.deadband,
                                   d.regime.dt, d.validation.settle_steps);
  const auto base =
      simulate_fleet(fleet, {d.regime.t_amb, d.regime.deadband, d.regime.dt, d.horizon, false});
  const double reference = std::accumulate(base.power_kw.begin(), base.power_kw.end(), 0.0) /
                           static_cast<double>(base.power_kw.size());
  Verdict v{true, "", {}};
  std::string fractions;
  for (const double hours : d.validation.hold_hours) {
    const auto target = static_cast<std::size_t>(std::lround(hours / d.regime.dt.count()));
    const double p = inner_value_at(target, m.response, d.horizon);
    const auto pt = inner_point(p, m.response, m.model.x0(), d.horizon);
    const auto plan = discretize_plan(pt.plan, fleet.size());
    const auto micro = apply_plan_micro(fleet, plan, m.model.grid,
                                        {d.regime.t_amb, d.regime.deadband, d.regime.dt, d.horizon,
                                         d.regime.t_set_new, d.validation.selection_seed});
    const auto markov = markov_power_trace(m.model, pt.plan, d.horizon);
    const auto cmp = compare_traces(markov, micro.power_kw, p_on, reference, p, pt.t_hold,
                                    d.validation.tolerance_fraction * p_on);
    v.pass = v.pass && cmp.hold_satisfied_fraction >= 0.9;
    fractions += (fractions.empty() ? "" : ", ") + fixed(hours, 0) + " h " +
                 fixed(cmp.hold_satisfied_fraction, 3);
    v.info.push_back(fixed(hours, 0) + " h block: P_hold " + fixed(p / p_on) + " P_ON, T_hold " +
                     std::to_string(pt.t_hold) + " steps, RMSE " + fixed(cmp.rmse) + ", delivered " +
                     std::to_string(micro.delivered) + "/" + std::to_string(micro.requested));
  }
  const double secs = seconds_since(start);
  v.pass = v.pass && secs < 600.0;
  v.detail = "hold_satisfied_fraction " + fractions + " (>= 0.9, tol 5% P_ON), " + fixed(secs, 1) +
             " s (< 600 s)";
  return v;
}

ReachHoldSet inner_set(const RegimeSpec& regime, std::span<const double> grid, double* p_nom) {
  const auto& d = defaults();
  const auto model = build_model(d.fleet.nominal, d.grid(), regime, d.p_on_kw(), d.estimation, false);
  if (p_nom) *p_nom = model.p_nom();
  const auto kernels = response_kernels(model, d.horizon + 1);
  const auto response = proportional_response(kernels, model.x0(), model.p_on());
  std::vector<double> usable;
  for (const double p : grid) {
    if (p <= model.p_nom()) usable.push_back(p);
  }
  return inner_boundary(usable, response, d.horizon, regime.dt);
}

Verdict fig5() {
  const auto& d = defaults();
  const auto grid = default_p_grid(default_model().model.p_nom(), d.p_hold_count);
  std::vector<ReachHoldSet> sets;
  for (const double s : {21.0, 21.5, 22.0}) {
    RegimeSpec r = d.regime;
    r.t_set_new = s;
    sets.push_back(inner_set(r, grid, nullptr));
  }
  std::size_t violations = 0;
  for (const double p : grid) {
    for (std::size_t i = 1; i < sets.size(); ++i) {
      if (query_t_at_p(sets[i], p) < query_t_at_p(sets[i - 1], p)) ++violations;
    }
  }
  const double mid = grid[grid.size() / 2];
  return {violations == 0,
          std::to_string(grid.size()) + " shared P_hold values, " + std::to_string(violations) +
              " ordering violations; at P=" + fixed(mid / d.p_on_kw()) + " P_ON T_hold = " +
              std::to_string(query_t_at_p(sets[0], mid)) + " / " +
              std::to_string(query_t_at_p(sets[1], mid)) + " / " +
              std::to_string(query_t_at_p(sets[2], mid)) + " steps for 21/21.5/22 C",
          {}};
}

Verdict fig6() {
  const auto& d = defaults();
  RegimeSpec pre = d.regime;
  pre.t_set = d.precool_start;
  double p_nom_base = 0.0, p_nom_pre = 0.0;
  {
    const auto probe = build_model(d.fleet.nominal, d.grid(), pre, d.p_on_kw(), d.estimation, false);
    p_nom_pre = probe.p_nom();
  }
  p_nom_base = default_model().model.p_nom();
  auto grid = default_p_grid(p_nom_base, d.p_hold_count);
  const auto extra = default_p_grid(p_nom_pre, d.p_hold_count);
  grid.insert(grid.end(), extra.begin(), extra.end());
  std::sort(grid.begin(), grid.end());
  const auto base = inner_set(d.regime, grid, nullptr);
  const auto precooled = inner_set(pre, grid, nullptr);
  std::size_t violations = 0;
  for (const double p : grid) {
    if (query_t_at_p(precooled, p) < query_t_at_p(base, p)) ++violations;
  }
  const double p_on = d.p_on_kw();
  return {violations == 0 && p_nom_pre > p_nom_base,
          "P_nom " + fixed(p_nom_pre / p_on) + " (19 C start) vs " + fixed(p_nom_base / p_on) +
              " (20 C) P_ON; " + std::to_string(violations) + " of " + std::to_string(grid.size()) +
              " P_hold values where the pre-cooled T_hold is shorter",
          {}};
}

Verdict aggregation() {
  const auto& d = defaults();
  const auto& m = default_model();
  const double p_on = m.model.p_on();
  const auto grid = default_p_grid(m.model.p_nom(), d.p_hold_count);
  const auto set = inner_boundary(grid, m.response, d.horizon, d.regime.dt);
  const auto combined = combine(set, set);

  std::size_t shape_errors = 0;
  for (const auto& pt : set.boundary) {
    if (std::abs(combined.simultaneous.p_at(pt.t_hold_steps) - 2.0 * query_p_at_t(set, pt.t_hold_steps)) >
        1e-9 * p_on) {
      ++shape_errors;
    }
    if (combined.consecutive.t_at(pt.p_hold_kw) != 2 * query_t_at_p(set, pt.p_hold_kw)) ++shape_errors;
  }

  // Back-to-back replay: population 2 repeats population 1's plan tau steps later.
  double worst = std::numeric_limits<double>::infinity();
  std::size_t worst_t = 0;
  double worst_p = 0.0;
  for (const auto& pt : combined.consecutive.points) {
    const auto first = inner_point(pt.p_hold_kw, m.response, m.model.x0(), d.horizon);
    const std::size_t tau = query_t_at_p(set, pt.p_hold_kw);
    const auto a = stepped_delta_p(m.model, first.plan, pt.t_hold_steps);
    const auto b = stepped_delta_p(m.model, first.plan, pt.t_hold_steps, tau);
    for (std::size_t k = 1; k <= pt.t_hold_steps; ++k) {
      const double margin = (a[k] + b[k] - pt.p_hold_kw) / (2.0 * p_on);
      if (margin < worst) {
        worst = margin;
        worst_t = k;
        worst_p = pt.p_hold_kw;
      }
    }
  }
  Verdict v;
  v.pass = shape_errors == 0 && worst >= -1e-6;
  v.detail = "identical fleets: " + std::to_string(shape_errors) + " doubling mismatches; " +
             std::to_string(combined.consecutive.points.size()) +
             " consecutive points replayed, min margin " + fmt("%.4g", worst) +
             " (P_ON1 + P_ON2) (>= -1e-6)";
  if (worst < -1e-6) {
    v.info.push_back("worst replay at P=" + fixed(worst_p / p_on) + " P_ON, step " +
                     std::to_string(worst_t) +
                     ": population 1 falls below zero reduction after its hold");
  }
  return v;
}

Verdict invariants() {
  const auto dir = std::filesystem::temp_directory_path() / "tclflex_acceptance_selfcheck";
  cli::Options o;
  o.subcommand = "selfcheck";
  o.out = dir;
  std::ostringstream out, err;
  const int code = cli::run(o, out, err);
  Verdict v;
  v.pass = code == cli::kSuccess;
  std::istringstream lines(out.str());
  std::string line;
  std::size_t passed = 0, total = 0;
  while (std::getline(lines, line)) {
    ++total;
    if (line.rfind("[PASS]", 0) == 0) ++passed;
    v.info.push_back(line);
  }
  if (!err.str().empty()) v.info.push_back(err.str());
  v.detail = "selfcheck on defaults: " + std::to_string(passed) + "/" + std::to_string(total) +
             " invariants green, exit " + std::to_string(code);
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"1 sandwich inner <= exact <= outer", sandwich},
      {"2 inner feasibility under population dynamics", inner_feasibility},
      {"3 structural zero of c_ON A_a x0", structural_zero},
      {"4 outer-approximation condition scan", outer_condition},
      {"5 Markov vs micro setpoint step", markov_micro},
      {"6 micro hold of 2/4/8 h inner plans", fig7},
      {"7 T_hold monotone in new setpoint", fig5},
      {"8 pre-cooling dominance", fig6},
      {"9 two-fleet aggregation", aggregation},
      {"10 invariant suite", invariants},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what(), {}};
    }
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << name << ": " << v.detail << std::endl;
    for (const auto& line : v.info) std::cout << "         " << line << std::endl;
    failures += v.pass ? 0 : 1;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " acceptance criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
