#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tclflex {

using Hours = std::chrono::duration<double, std::ratio<3600>>;

// Second-order equivalent thermal parameter (ETP) model of one cooling TCL.
// Capacities in kWh/degC, conductances in kW/degC, heat flows and power in kW.
// The shipped defaults describe a mid-size residential air conditioner with a
// lightly coupled interior mass.
struct TclParams {
  double c_air = 1.0;   // inner air (plus furnishings)
  double c_mass = 2.0;  // interior solid mass
  double ua = 0.25;     // envelope
  double hm = 0.3;      // air <-> mass
  double q_on = -7.5;   // net heat gain to air while the compressor runs
  double q_off = 0.0;   // net heat gain to air while idle
  double q_mass = 0.0;  // heat flux into the mass
  double p_rate = 2.5;  // electrical draw while ON

  // Throws InvalidInput on non-finite or non-physical values.
  void validate() const;

  // Steady-state ON fraction needed to hold the air at t_set, clamped to
  // [0, 1]. Mass and air are assumed to be at t_set.
  double duty_cycle(double t_set, double t_amb) const;
};

struct TclState {
  double t_air = 20.0;
  double t_mass = 20.0;
  bool on = false;
  double t_set = 20.0;
};

// Thermostat hysteresis for a cooling unit: ON at or above the upper band
// edge, OFF at or below the lower edge, otherwise unchanged.
TclState apply_thermostat(TclState state, double deadband);

// Exact discretisation of the affine ETP system for both compressor modes.
// Mode is held fixed over a step; switching is evaluated once per step after
// integration.
class EtpPropagator {
 public:
  EtpPropagator(const TclParams& params, double t_amb, Hours dt);

  // Integrates (t_air, t_mass) over one step with the mode held fixed.
  TclState advance(const TclState& state) const;

  // advance() followed by the thermostat.
  TclState step(const TclState& state, double deadband) const;

  Hours dt() const { return dt_; }

 private:
  struct ModeMap {
    Eigen::Matrix2d transition;
    Eigen::Vector2d equilibrium;
  };
  std::array<ModeMap, 2> modes_;
  Hours dt_;
};

// One step of a single TCL. Throws InvalidInput on non-finite input or dt <= 0.
TclState step_tcl(const TclState& state, const TclParams& params, double t_amb,
                  double deadband, Hours dt);

// Relative half-width of the uniform perturbation applied to each nominal
// parameter when sampling a fleet.
struct Heterogeneity {
  double c_air = 0.0;
  double c_mass = 0.0;
  double ua = 0.0;
  double hm = 0.0;
  double q_on = 0.0;
  double q_off = 0.0;
  double q_mass = 0.0;
  double p_rate = 0.0;

  static Heterogeneity uniform(double spread);
  bool is_zero() const;
};

struct FleetSpec {
  std::size_t n_units = 1000;
  TclParams nominal;
  Heterogeneity heterogeneity;
  double deadband = 1.0;
  double t_amb = 32.0;
  double initial_setpoint = 20.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Fleet {
  std::vector<TclParams> params;
  std::vector<TclState> states;

  std::size_t size() const { return params.size(); }
  double capacity_kw() const;
};

// Draws unit parameters and initial states. Deterministic in spec.seed.
Fleet sample_fleet(const FleetSpec& spec);

struct SetpointChange {
  std::size_t step = 0;
  std::size_t unit = 0;
  double t_set = 0.0;
};

struct SimulationOptions {
  double t_amb = 32.0;
  double deadband = 1.0;
  Hours dt = std::chrono::minutes(1);
  std::size_t horizon = 0;
  bool record_states = false;
};

struct FleetTrace {
  // power_kw[k] is the aggregate draw of the fleet state at step k,
  // k = 0..horizon.
  std::vector<double> power_kw;
  // states[k][unit]; only filled when record_states is set.
  std::vector<std::vector<TclState>> states;
  std::vector<TclState> final_states;
};

// Simulates every unit for `horizon` steps. A change scheduled at step k is
// applied to the unit's setpoint before that step's integration and
// thermostat update.
FleetTrace simulate_fleet(const Fleet& fleet, const SimulationOptions& options,
                          std::span<const SetpointChange> schedule = {});

// CSV with header step,unit,T_a,T_m,on,T_set.
void write_state_trace_csv(std::ostream& out, const FleetTrace& trace);

}  // namespace tclflex
