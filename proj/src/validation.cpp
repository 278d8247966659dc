#include "tclflex/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>

#include "parallel.hpp"
#include "tclflex/errors.hpp"
#include "tclflex/io.hpp"

namespace tclflex {

std::int64_t DiscretizedPlan::total() const {
  return steps() == 0 ? 0 : cumulative(steps() - 1);
}

std::int64_t DiscretizedPlan::cumulative(std::size_t k) const {
  std::int64_t sum = 0;
  for (std::size_t n = 0; n <= k && n < counts.size(); ++n) {
    sum = std::accumulate(counts[n].begin(), counts[n].end(), sum);
  }
  return sum;
}

DiscretizedPlan discretize_plan(const ControlPlan& plan, std::size_t n_units) {
  if (n_units == 0) throw InvalidInput("discretisation needs at least one unit");
  DiscretizedPlan out;
  out.n_units = n_units;
  const auto dim = plan.u.empty() ? Eigen::Index{0} : plan.u.front().size();
  Vector e = Vector::Zero(dim);
  out.error.push_back(e);
  const double scale = static_cast<double>(n_units);
  for (const auto& u : plan.u) {
    if (u.size() != dim) throw InvalidInput("plan vectors differ in length");
    std::vector<std::int64_t> row(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double target = scale * u(i) + e(i);
      const auto count = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(target + 1e-9)));
      row[static_cast<std::size_t>(i)] = count;
      e(i) = target - static_cast<double>(count);
    }
    out.counts.push_back(std::move(row));
    out.error.push_back(e);
  }
  return out;
}

Fleet settle_fleet(const Fleet& fleet, double t_amb, double deadband, Hours dt,
                   std::size_t steps) {
  SimulationOptions options{t_amb, deadband, dt, steps, false};
  auto trace = simulate_fleet(fleet, options);
  Fleet out = fleet;
  out.states = std::move(trace.final_states);
  return out;
}

Fleet initialize_from_distribution(const Fleet& fleet, const BinGrid& grid, const Vector& x,
                                   std::uint64_t seed) {
  if (x.size() != static_cast<Eigen::Index>(grid.size())) {
    throw InvalidInput("distribution dimension does not match the grid");
  }
  if ((x.array() < 0.0).any() || !(x.sum() > 0.0)) {
    throw InvalidInput("distribution must be nonnegative with positive mass");
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(x.data(), x.data() + x.size());
  std::uniform_real_distribution<double> within(0.0, 1.0);
  Fleet out = fleet;
  const std::size_t per_mode = grid.bins_per_mode();
  for (std::size_t u = 0; u < out.size(); ++u) {
    const std::size_t state = pick(rng);
    const std::size_t bin = state % per_mode;
    auto& s = out.states[u];
    s.on = grid.is_on_state(state);
    s.t_air = grid.lower_edge(bin) + within(rng) * grid.width();
    s.t_mass = s.t_air + out.params[u].q_mass / out.params[u].hm;
  }
  return out;
}

bool MicroRun::degraded() const {
  return requested > 0 &&
         static_cast<double>(requested - delivered) > 0.05 * static_cast<double>(requested);
}

MicroRun apply_plan_micro(const Fleet& fleet, const DiscretizedPlan& plan, const BinGrid& grid,
                          const MicroOptions& options) {
  const std::size_t n = fleet.size();
  if (n == 0) throw InvalidInput("cannot simulate an empty fleet");
  if (fleet.states.size() != n) throw InvalidInput("fleet params/states size mismatch");
  if (!(options.deadband > 0.0)) throw InvalidInput("deadband must be > 0");
  for (const auto& row : plan.counts) {
    if (row.size() != grid.size()) throw InvalidInput("plan dimension does not match the grid");
  }

  std::vector<EtpPropagator> props;
  props.reserve(n);
  for (const auto& p : fleet.params) props.emplace_back(p, options.t_amb, options.dt);

  std::vector<TclState> states = fleet.states;
  std::vector<char> actuated(n, 0);
  std::mt19937_64 rng(options.selection_seed);
  MicroRun run;
  run.power_kw.reserve(options.horizon + 1);

  auto power = [&] {
    double total = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (states[u].on) total += fleet.params[u].p_rate;
    }
    return total;
  };

  std::vector<std::vector<std::size_t>> members(grid.size());
  for (std::size_t k = 0;; ++k) {
    run.power_kw.push_back(power());
    if (k == options.horizon) break;

    if (k < plan.steps()) {
      for (auto& m : members) m.clear();
      for (std::size_t u = 0; u < n; ++u) {
        if (!actuated[u]) members[grid.index(states[u].t_air, states[u].on)].push_back(u);
      }
      for (std::size_t bin = 0; bin < grid.size(); ++bin) {
        const std::int64_t want = plan.counts[k][bin];
        if (want <= 0) continue;
        const auto& pool = members[bin];
        const auto available = static_cast<std::int64_t>(pool.size());
        const auto take = std::min(want, available);
        run.requested += want;
        run.delivered += take;
        if (take < want) run.shortfalls.push_back({k, bin, want, available});
        std::vector<std::size_t> chosen;
        std::sample(pool.begin(), pool.end(), std::back_inserter(chosen),
                    static_cast<std::size_t>(take), rng);
        for (const auto u : chosen) {
          actuated[u] = 1;
          states[u].t_set = options.t_set_new;
        }
      }
    }

    detail::parallel_for(n, [&](std::size_t u) {
      states[u] = props[u].step(states[u], options.deadband);
    });
  }
  run.final_states = std::move(states);
  return run;
}

std::vector<double> markov_power_trace(const ReachHoldModel& model, const ControlPlan& plan,
                                       std::size_t horizon) {
  auto state = PopulationState::from_stationary(model.x0());
  const Vector zero = Vector::Zero(model.x0().size());
  std::vector<double> trace;
  trace.reserve(horizon + 1);
  for (std::size_t k = 0;; ++k) {
    trace.push_back(aggregate_power(state, model.output));
    if (k == horizon) break;
    const Vector& u = k < plan.steps() ? plan.u[k] : zero;
    state = step_population(state, u, model.nominal, model.actuated);
  }
  return trace;
}

TraceComparison compare_traces(std::span<const double> markov_kw, std::span<const double> micro_kw,
                               double p_on_kw, double reference_kw, double p_hold_kw,
                               std::size_t t_hold, double tolerance_kw) {
  if (markov_kw.size() != micro_kw.size()) throw InvalidInput("trace lengths differ");
  if (markov_kw.empty()) throw InvalidInput("empty traces");
  if (!(p_on_kw > 0.0)) throw InvalidInput("P_ON must be positive");
  TraceComparison out;
  double sq = 0.0;
  for (std::size_t k = 0; k < markov_kw.size(); ++k) {
    const double d = markov_kw[k] - micro_kw[k];
    sq += d * d;
    out.max_abs_dev = std::max(out.max_abs_dev, std::abs(d));
  }
  out.rmse = std::sqrt(sq / static_cast<double>(markov_kw.size())) / p_on_kw;
  out.max_abs_dev /= p_on_kw;

  const std::size_t last = std::min(t_hold, micro_kw.size() - 1);
  if (last >= 1) {
    std::size_t ok = 0;
    for (std::size_t k = 1; k <= last; ++k) {
      if (reference_kw - micro_kw[k] >= p_hold_kw - tolerance_kw) ++ok;
    }
    out.hold_satisfied_fraction = static_cast<double>(ok) / static_cast<double>(last);
  }
  return out;
}

void write_paired_trace_csv(std::ostream& out, std::span<const double> markov_kw,
                            std::span<const double> micro_kw) {
  if (markov_kw.size() != micro_kw.size()) throw InvalidInput("trace lengths differ");
  out << "step,markov_kW,micro_kW\n";
  for (std::size_t k = 0; k < markov_kw.size(); ++k) {
    out << k << ',' << io::exact(markov_kw[k]) << ',' << io::exact(micro_kw[k]) << '\n';
  }
}

}  // namespace tclflex
