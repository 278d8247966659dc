#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tclflex/lp.hpp"
#include "tclflex/markov.hpp"

namespace tclflex {

// Setpoint-change scenario: the fleet idles at t_set and actuated units move
// to t_set_new.
struct RegimeSpec {
  double t_set = 20.0;
  double t_set_new = 22.0;
  double deadband = 1.0;
  double t_amb = 32.0;
  Hours dt = std::chrono::minutes(1);

  double setpoint_change() const { return t_set_new - t_set; }
};

struct ReachHoldModel {
  TclParams params;
  BinGrid grid;
  RegimeSpec regime;
  TransitionMatrix nominal;                 // A
  TransitionMatrix actuated;                // A_a
  std::optional<TransitionMatrix> squeezed; // A_out
  OutputVector output;
  StationaryResult stationary;

  const Vector& x0() const { return stationary.distribution; }
  double p_on() const { return output.p_on; }
  double p_nom() const { return output.c.dot(x0()); }
};

// Transition matrix of the squeezed system: setpoint t_set - deadband/2 and a
// deadband one bin wide. Throws InvalidConfiguration when the bin width
// exceeds the deadband.
TransitionMatrix build_fictitious_system(const TclParams& params, const BinGrid& grid,
                                         const RegimeSpec& regime,
                                         const EstimationSettings& settings);

// Estimates A (seed), A_a (seed + 1) and optionally A_out (seed + 2), then
// the stationary distribution of A. p_on_kw is the fleet capacity.
ReachHoldModel build_model(const TclParams& params, const BinGrid& grid,
                           const RegimeSpec& regime, double p_on_kw,
                           const EstimationSettings& settings, bool with_squeezed = true);

// Row k of each matrix is c_ON M^k, k = 0..horizon.
struct Kernels {
  Matrix h;
  Matrix h_a;
  Matrix h_out;  // empty without a squeezed system

  std::size_t horizon() const { return static_cast<std::size_t>(h.rows()) - 1; }
  bool has_squeezed() const { return h_out.rows() > 0; }
};

Kernels response_kernels(const TransitionMatrix& nominal, const TransitionMatrix& actuated,
                         const TransitionMatrix* squeezed, const OutputVector& output,
                         std::size_t horizon);
Kernels response_kernels(const ReachHoldModel& model, std::size_t horizon);

// u[k] for k = 0..steps-1. Proportional plans also keep alpha with
// u[k] = alpha[k] x0.
struct ControlPlan {
  std::vector<Vector> u;
  std::vector<double> alpha;

  static ControlPlan proportional(std::vector<double> alpha, const Vector& x0);
  std::size_t steps() const { return u.size(); }
  double budget() const;  // sum_k 1'u[k]
};

// Delta P[k] = sum_{n<k} (h_{k-n} - h_{a,k-n})' u[n] in kW for k = 0..horizon;
// entry 0 is zero. Throws InvalidInput when horizon exceeds the kernels or the
// plan is longer than the kernels.
Vector delta_p(const ControlPlan& plan, const Kernels& kernels, std::size_t horizon);

enum class Method { exact, inner, outer };
std::string to_string(Method method);
Method parse_method(std::string_view text);

struct ReachHoldPoint {
  double p_hold_kw = 0.0;
  std::size_t t_hold_steps = 0;
  Method method = Method::inner;
  bool horizon_limited = false;
};

// Boundary points sorted by T_hold ascending (ties: larger P first).
struct ReachHoldSet {
  Method method = Method::inner;
  std::vector<ReachHoldPoint> boundary;
  Hours dt = std::chrono::minutes(1);
  double p_nom_kw = 0.0;
  double p_on_kw = 0.0;
  // Outer sets only: false when the outer-condition scan failed.
  bool verified = true;

  // True when P_hold is nonincreasing along the sorted boundary.
  bool monotone() const;
  void sort();
};

// ---- exact ----------------------------------------------------------------

struct ExactResult {
  double p_hold_kw = 0.0;
  ControlPlan plan;
  lp::LpSolution lp;
};

inline constexpr std::size_t kExactVariableCap = 20000;

// Largest P_hold sustainable for k = 1..t_hold over plans u[0..t_hold-1]
// admissible under the nominal dynamics from x0 (the state is eliminated).
// Throws InvalidInput when t_hold * 2N exceeds kExactVariableCap and
// NumericalFailure when the LP does not reach an optimum.
ExactResult solve_exact(std::size_t t_hold, const Kernels& kernels, const Vector& x0,
                        const TransitionMatrix& nominal);

// ---- inner ----------------------------------------------------------------

// Responses of the proportional policy from x0:
// nominal[m] = c_ON A^m x0 (equal to p_nom at stationarity) and
// actuated[m] = c_ON A_a^m x0.
struct ProportionalResponse {
  std::vector<double> nominal;
  std::vector<double> actuated;
  double p_nom = 0.0;
  double p_on = 0.0;

  std::size_t horizon() const { return nominal.size() - 1; }
};

ProportionalResponse proportional_response(const Kernels& kernels, const Vector& x0,
                                           double p_on);

// Smallest alpha[k] keeping Delta P[k+1] >= p_hold given alpha[0..k-1]:
//   (p_hold - sum_n alpha[n] (nominal[k+1-n] - actuated[k+1-n]))
//     / (nominal[1] - actuated[1]).
// With nominal = p_nom and actuated[1] = 0 this is the textbook recursion
// p_hold/p_nom + sum_n alpha[n] (-1 + actuated[k+1-n]/p_nom).
// Throws InvalidConfiguration if p_nom <= 0 or actuation does not lower the
// next-step power.
double alpha_lower_bound(std::size_t k, std::span<const double> alpha, double p_hold,
                         const ProportionalResponse& response);

struct InnerPoint {
  double p_hold_kw = 0.0;
  std::size_t t_hold = 0;
  // Step at which the budget ran out; t_max + 1 if it never did.
  std::size_t t_depleted = 0;
  bool horizon_limited = false;
  ControlPlan plan;
};

// Algorithm 1. response.horizon() must be at least t_max + 1.
InnerPoint inner_point(double p_hold_kw, const ProportionalResponse& response, const Vector& x0,
                       std::size_t t_max);

// Largest P_hold whose inner T_hold is at least t_steps (bisection; the
// returned value is itself a verified inner point).
double inner_value_at(std::size_t t_steps, const ProportionalResponse& response,
                      std::size_t t_max);

// n evenly spaced values in (0, p_nom].
std::vector<double> default_p_grid(double p_nom, std::size_t n = 50);

ReachHoldSet inner_boundary(std::span<const double> p_grid, const ProportionalResponse& response,
                            std::size_t t_max, Hours dt);

// ---- outer ----------------------------------------------------------------

// Unit mass on the ON bin containing t_set - deadband/2 (colder bin on an edge).
Vector squeezed_start(const BinGrid& grid, double t_set, double deadband);

// Support of the squeezed chain's limit distribution reached from x_out,
// plus x_out's own bin.
std::vector<std::size_t> reachable_support(const TransitionMatrix& squeezed, const Vector& x_out);

struct OuterResult {
  double p_hold_kw = 0.0;
  ControlPlan plan;
  std::vector<std::size_t> support;
  lp::LpSolution lp;
};

// Budget-relaxed LP over the squeezed response with u restricted to `support`
// (all bins when empty).
OuterResult solve_outer(std::size_t t_hold, const Kernels& kernels,
                        std::span<const std::size_t> support = {});

struct OuterConditionReport {
  bool holds = true;
  double worst_margin_kw = 0.0;
  std::size_t worst_step = 0;
  std::size_t worst_bin = 0;
  std::size_t horizon = 0;
  std::size_t violating_steps = 0;
};

// h^x_m = (h_out,m - h_a,m)' x_out against every entry of h_m - h_a,m, for
// m = 1..horizon.
OuterConditionReport check_outer_condition(const Kernels& kernels, const Vector& x_out,
                                           std::size_t horizon);

// ---- serialisation --------------------------------------------------------

// CSV header T_hold_steps,T_hold_hours,P_hold_kW,method.
void write_reachhold_csv(std::ostream& out, const ReachHoldSet& set);
ReachHoldSet read_reachhold_csv(std::istream& in);

}  // namespace tclflex
