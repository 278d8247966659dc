#include "tclflex/etp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "tclflex/errors.hpp"

namespace tclflex {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require_positive(double v, const char* name) {
  if (!finite(v) || v <= 0.0) {
    std::ostringstream msg;
    msg << "TclParams." << name << " must be finite and > 0 (got " << v << ")";
    throw InvalidInput(msg.str());
  }
}

// exp(M t) for a 2x2 matrix with distinct real eigenvalues. The ETP system
// matrix always qualifies: its off-diagonal terms are strictly positive.
Eigen::Matrix2d expm2(const Eigen::Matrix2d& m, double t) {
  const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  const double half_trace = 0.5 * (a + d);
  const double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  const double l1 = half_trace + disc;
  const double l2 = half_trace - disc;
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  return (std::exp(l1 * t) * (m - l2 * id) - std::exp(l2 * t) * (m - l1 * id)) /
         (l1 - l2);
}

}  // namespace

void TclParams::validate() const {
  require_positive(c_air, "c_air");
  require_positive(c_mass, "c_mass");
  require_positive(ua, "ua");
  require_positive(hm, "hm");
  require_positive(p_rate, "p_rate");
  if (!finite(q_on) || !finite(q_off) || !finite(q_mass)) {
    throw InvalidInput("TclParams heat flows must be finite");
  }
  if (!(q_on < q_off)) {
    throw InvalidInput("cooling TCL requires q_on < q_off");
  }
}

double TclParams::duty_cycle(double t_set, double t_amb) const {
  const double gain = ua * (t_amb - t_set) + q_off + q_mass;
  return std::clamp(gain / (q_off - q_on), 0.0, 1.0);
}

TclState apply_thermostat(TclState state, double deadband) {
  const double half = 0.5 * deadband;
  if (state.t_air >= state.t_set + half) {
    state.on = true;
  } else if (state.t_air <= state.t_set - half) {
    state.on = false;
  }
  return state;
}

EtpPropagator::EtpPropagator(const TclParams& params, double t_amb, Hours dt)
    : dt_(dt) {
  params.validate();
  if (!finite(t_amb)) throw InvalidInput("ambient temperature must be finite");
  if (!finite(dt.count()) || dt.count() <= 0.0) {
    throw InvalidInput("time step must be finite and > 0");
  }
  Eigen::Matrix2d system;
  system << -(params.ua + params.hm) / params.c_air, params.hm / params.c_air,
      params.hm / params.c_mass, -params.hm / params.c_mass;
  const Eigen::Matrix2d transition = expm2(system, dt.count());
  for (int mode = 0; mode < 2; ++mode) {
    const double q_air = mode == 1 ? params.q_on : params.q_off;
    const double t_air_eq = t_amb + (q_air + params.q_mass) / params.ua;
    const double t_mass_eq = t_air_eq + params.q_mass / params.hm;
    modes_[mode] = ModeMap{transition, Eigen::Vector2d(t_air_eq, t_mass_eq)};
  }
}

TclState EtpPropagator::advance(const TclState& state) const {
  const ModeMap& m = modes_[state.on ? 1 : 0];
  const Eigen::Vector2d x(state.t_air, state.t_mass);
  const Eigen::Vector2d next = m.equilibrium + m.transition * (x - m.equilibrium);
  TclState out = state;
  out.t_air = next(0);
  out.t_mass = next(1);
  return out;
}

TclState EtpPropagator::step(const TclState& state, double deadband) const {
  return apply_thermostat(advance(state), deadband);
}

TclState step_tcl(const TclState& state, const TclParams& params, double t_amb,
                  double deadband, Hours dt) {
  if (!finite(state.t_air) || !finite(state.t_mass) || !finite(state.t_set)) {
    throw InvalidInput("TCL state must be finite");
  }
  if (!finite(deadband) || deadband <= 0.0) {
    throw InvalidInput("deadband must be finite and > 0");
  }
  return EtpPropagator(params, t_amb, dt).step(state, deadband);
}

Heterogeneity Heterogeneity::uniform(double spread) {
  return Heterogeneity{spread, spread, spread, spread,
                       spread, spread, spread, spread};
}

bool Heterogeneity::is_zero() const {
  return c_air == 0 && c_mass == 0 && ua == 0 && hm == 0 && q_on == 0 &&
         q_off == 0 && q_mass == 0 && p_rate == 0;
}

void FleetSpec::validate() const {
  if (n_units < 1) throw InvalidInput("fleet must contain at least one unit");
  nominal.validate();
  for (double s : {heterogeneity.c_air, heterogeneity.c_mass, heterogeneity.ua,
                   heterogeneity.hm, heterogeneity.q_on, heterogeneity.q_off,
                   heterogeneity.q_mass, heterogeneity.p_rate}) {
    if (!finite(s) || s < 0.0 || s >= 1.0) {
      throw InvalidInput("heterogeneity spreads must lie in [0, 1)");
    }
  }
  if (!finite(deadband) || deadband <= 0.0) {
    throw InvalidInput("deadband must be > 0");
  }
  if (!finite(t_amb) || !finite(initial_setpoint)) {
    throw InvalidInput("fleet temperatures must be finite");
  }
}

double Fleet::capacity_kw() const {
  double total = 0.0;
  for (const auto& p : params) total += p.p_rate;
  return total;
}

Fleet sample_fleet(const FleetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& h = spec.heterogeneity;
  const auto perturb = [&](double nominal, double spread) {
    const double draw = sym(rng);
    return nominal * (1.0 + spread * draw);
  };
  const double duty = spec.nominal.duty_cycle(spec.initial_setpoint, spec.t_amb);
  const double lo = spec.initial_setpoint - 0.5 * spec.deadband;

  Fleet fleet;
  fleet.params.reserve(spec.n_units);
  fleet.states.reserve(spec.n_units);
  for (std::size_t i = 0; i < spec.n_units; ++i) {
    TclParams p = spec.nominal;
    p.c_air = perturb(p.c_air, h.c_air);
    p.c_mass = perturb(p.c_mass, h.c_mass);
    p.ua = perturb(p.ua, h.ua);
    p.hm = perturb(p.hm, h.hm);
    p.q_on = perturb(p.q_on, h.q_on);
    p.q_off = perturb(p.q_off, h.q_off);
    p.q_mass = perturb(p.q_mass, h.q_mass);
    p.p_rate = perturb(p.p_rate, h.p_rate);
    p.validate();

    TclState s;
    s.t_set = spec.initial_setpoint;
    s.t_air = lo + spec.deadband * unit(rng);
    s.t_mass = s.t_air;
    s.on = unit(rng) < duty;
    fleet.params.push_back(p);
    fleet.states.push_back(s);
  }
  return fleet;
}

FleetTrace simulate_fleet(const Fleet& fleet, const SimulationOptions& options,
                          std::span<const SetpointChange> schedule) {
  const std::size_t n = fleet.size();
  if (n == 0) throw InvalidInput("cannot simulate an empty fleet");
  if (fleet.states.size() != n) {
    throw InvalidInput("fleet params/states size mismatch");
  }
  if (!finite(options.deadband) || options.deadband <= 0.0) {
    throw InvalidInput("deadband must be > 0");
  }
  const std::size_t horizon = options.horizon;

  std::vector<std::vector<SetpointChange>> per_unit(n);
  for (const auto& c : schedule) {
    if (c.unit >= n) throw InvalidInput("setpoint change names an unknown unit");
    if (c.step >= std::max<std::size_t>(horizon, 1)) {
      throw InvalidInput("setpoint change scheduled beyond the horizon");
    }
    if (!finite(c.t_set)) throw InvalidInput("setpoint must be finite");
    per_unit[c.unit].push_back(c);
  }
  for (auto& changes : per_unit) {
    std::stable_sort(changes.begin(), changes.end(),
                     [](const auto& a, const auto& b) { return a.step < b.step; });
  }

  // on_flags[unit][k]; recorded[unit][k] when requested.
  std::vector<std::vector<char>> on_flags(n);
  std::vector<std::vector<TclState>> recorded(options.record_states ? n : 0);
  std::vector<TclState> final_states(n);

  detail::parallel_for(n, [&](std::size_t u) {
    const EtpPropagator prop(fleet.params[u], options.t_amb, options.dt);
    TclState s = fleet.states[u];
    auto& flags = on_flags[u];
    flags.resize(horizon + 1);
    if (options.record_states) recorded[u].reserve(horizon + 1);
    std::size_t next_change = 0;
    const auto& changes = per_unit[u];
    for (std::size_t k = 0;; ++k) {
      flags[k] = s.on ? 1 : 0;
      if (options.record_states) recorded[u].push_back(s);
      if (k == horizon) break;
      while (next_change < changes.size() && changes[next_change].step == k) {
        s.t_set = changes[next_change].t_set;
        ++next_change;
      }
      s = prop.step(s, options.deadband);
    }
    final_states[u] = s;
  });

  FleetTrace trace;
  trace.power_kw.assign(horizon + 1, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const double rate = fleet.params[u].p_rate;
    for (std::size_t k = 0; k <= horizon; ++k) {
      if (on_flags[u][k]) trace.power_kw[k] += rate;
    }
  }
  if (options.record_states) {
    trace.states.assign(horizon + 1, std::vector<TclState>(n));
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t k = 0; k <= horizon; ++k) trace.states[k][u] = recorded[u][k];
    }
  }
  trace.final_states = std::move(final_states);
  return trace;
}

void write_state_trace_csv(std::ostream& out, const FleetTrace& trace) {
  out << "step,unit,T_a,T_m,on,T_set\n";
  const auto old_precision = out.precision(10);
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    for (std::size_t u = 0; u < trace.states[k].size(); ++u) {
      const auto& s = trace.states[k][u];
      out << k << ',' << u << ',' << s.t_air << ',' << s.t_mass << ','
          << (s.on ? 1 : 0) << ',' << s.t_set << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace tclflex
