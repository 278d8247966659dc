#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tclflex/etp.hpp"
#include "tclflex/markov.hpp"
#include "tclflex/reachhold.hpp"

namespace tclflex {

// Integer actuation counts per step and bin. error[k] is the fractional
// remainder carried into step k; error[0] = 0.
struct DiscretizedPlan {
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<Vector> error;
  std::size_t n_units = 0;

  std::size_t steps() const { return counts.size(); }
  std::int64_t total() const;
  // Actuations up to and including step k.
  std::int64_t cumulative(std::size_t k) const;
};

// U[k] = n_units u[k]; counts[k] = floor(U[k] + e[k]); e[k+1] = U[k] + e[k] - counts[k].
// A 1e-9 guard absorbs rounding so exact integers are not floored down.
DiscretizedPlan discretize_plan(const ControlPlan& plan, std::size_t n_units);

// Runs the fleet forward `steps` steps at its current setpoints, so the
// initial distribution settles before an experiment.
Fleet settle_fleet(const Fleet& fleet, double t_amb, double deadband, Hours dt,
                   std::size_t steps);

// Redraws every unit's state from a bin distribution x: bin drawn from x,
// T_a uniform inside it, T_m = T_a + q_mass / hm, mode from the bin. Used to
// start a micro-simulation from the same distribution as the Markov model.
Fleet initialize_from_distribution(const Fleet& fleet, const BinGrid& grid, const Vector& x,
                                   std::uint64_t seed);

struct MicroOptions {
  double t_amb = 32.0;
  double deadband = 1.0;
  Hours dt = std::chrono::minutes(1);
  std::size_t horizon = 0;
  double t_set_new = 22.0;
  std::uint64_t selection_seed = 0;
};

struct ShortfallEvent {
  std::size_t step = 0;
  std::size_t bin = 0;
  std::int64_t requested = 0;
  std::int64_t available = 0;
};

struct MicroRun {
  std::vector<double> power_kw;  // horizon + 1 entries
  std::int64_t requested = 0;
  std::int64_t delivered = 0;
  std::vector<ShortfallEvent> shortfalls;
  std::vector<TclState> final_states;

  // More than 5% of the requested actuations could not be delivered.
  bool degraded() const;
};

// At each step k < plan.steps(), picks counts[k][i] not-yet-actuated units
// whose (T_a, mode) maps to bin i, uniformly at random, moves them to
// t_set_new and then advances every unit one step. Units are never
// re-selected; a bin with too few units actuates what it has and logs a
// shortfall.
MicroRun apply_plan_micro(const Fleet& fleet, const DiscretizedPlan& plan, const BinGrid& grid,
                          const MicroOptions& options);

// Aggregate Markov power c_ON (x + x_a) for k = 0..horizon under plan from
// the stationary state; u[k] is zero past the plan.
std::vector<double> markov_power_trace(const ReachHoldModel& model, const ControlPlan& plan,
                                       std::size_t horizon);

struct TraceComparison {
  double rmse = 0.0;         // / P_ON
  double max_abs_dev = 0.0;  // / P_ON
  double hold_satisfied_fraction = 1.0;
};

// hold_satisfied_fraction counts k = 1..t_hold with
// reference_kw - micro_kw[k] >= p_hold_kw - tolerance_kw.
TraceComparison compare_traces(std::span<const double> markov_kw, std::span<const double> micro_kw,
                               double p_on_kw, double reference_kw, double p_hold_kw,
                               std::size_t t_hold, double tolerance_kw);

// Paired CSV with header step,markov_kW,micro_kW.
void write_paired_trace_csv(std::ostream& out, std::span<const double> markov_kw,
                            std::span<const double> micro_kw);

}  // namespace tclflex
