#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include <Eigen/Dense>

#include "tclflex/etp.hpp"

namespace tclflex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// N equal-width air-temperature bins per compressor mode. State index layout
// is [OFF 0..N-1 | ON N..2N-1], cold to hot inside each block. Bins are
// half-open [lo, hi) except the last, which is closed. Temperatures outside
// [t_min, t_max] are clamped into the boundary bins.
class BinGrid {
 public:
  BinGrid(double t_min, double t_max, std::size_t bins_per_mode);

  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  std::size_t bins_per_mode() const { return bins_; }
  std::size_t size() const { return 2 * bins_; }
  double width() const { return (t_max_ - t_min_) / static_cast<double>(bins_); }

  double lower_edge(std::size_t bin) const;
  double upper_edge(std::size_t bin) const { return lower_edge(bin + 1); }

  // Temperature bin in 0..N-1.
  std::size_t temperature_bin(double t_air) const;
  // Full state index in 0..2N-1.
  std::size_t index(double t_air, bool on) const;
  bool is_on_state(std::size_t state) const { return state >= bins_; }

  // Throws InvalidConfiguration unless [t_set - db/2, t_set + db/2] lies
  // inside [t_min, t_max].
  void require_band(double t_set, double deadband) const;

  bool operator==(const BinGrid&) const = default;

 private:
  double t_min_;
  double t_max_;
  std::size_t bins_;
};

BinGrid build_grid(double t_min, double t_max, std::size_t bins_per_mode);

// Operating point a transition matrix encodes.
struct ThermalRegime {
  double t_set = 20.0;
  double deadband = 1.0;
  double t_amb = 32.0;
  Hours dt = std::chrono::minutes(1);
};

// Column-stochastic one-step dynamics x[k+1] = P x[k].
class TransitionMatrix {
 public:
  static constexpr double kColumnTolerance = 1e-9;

  explicit TransitionMatrix(Matrix entries, std::optional<BinGrid> grid = {},
                            ThermalRegime regime = {});

  const Matrix& entries() const { return entries_; }
  Eigen::Index size() const { return entries_.rows(); }
  const std::optional<BinGrid>& grid() const { return grid_; }
  const ThermalRegime& regime() const { return regime_; }

  Vector apply(const Vector& x) const { return entries_ * x; }
  // max_j |sum_i P(i, j) - 1|
  double max_column_error() const;

 private:
  Matrix entries_;
  std::optional<BinGrid> grid_;
  ThermalRegime regime_;
};

struct EstimationSettings {
  std::size_t samples_per_bin = 4000;
  std::uint64_t seed = 0;
};

// Monte-Carlo estimate of the bin transition matrix. Each column starts
// `samples_per_bin` units with air temperature uniform in the bin, mass
// temperature at its quasi-steady value t_air + q_mass / hm, and the bin's
// compressor mode; every unit is advanced one step through the ETP model and
// thermostat and its landing bin counted. Columns use seeds derived from
// (settings.seed, column) and are estimated in parallel.
TransitionMatrix estimate_transition_matrix(const TclParams& params,
                                            const BinGrid& grid,
                                            const ThermalRegime& regime,
                                            const EstimationSettings& settings);

struct StationaryOptions {
  double tolerance = 1e-12;
  double max_residual = 1e-10;
  std::size_t max_iterations = 2'000'000;
};

struct StationaryResult {
  Vector distribution;
  // False when the chain has more than one closed communicating class; the
  // returned vector is then the limit reached from the start vector.
  bool unique = true;
  double residual = 0.0;  // ||P x - x||_inf
  std::size_t iterations = 0;
};

// Power iteration on the lazy chain (I + P) / 2, which shares P's fixed
// points and is aperiodic. Without an explicit start the iteration begins
// uniform over the deadband bins of the matrix's regime (both modes), or
// uniform over all states when the matrix carries no grid.
StationaryResult stationary_distribution(const TransitionMatrix& matrix,
                                         std::optional<Vector> start = {},
                                         const StationaryOptions& options = {});

// Uniform start vector over the bins whose centres fall in the deadband.
Vector deadband_start(const BinGrid& grid, double t_set, double deadband);

// Non-actuated (x) and actuated (x_a) population fractions.
struct PopulationState {
  Vector x;
  Vector x_a;

  static PopulationState from_stationary(const Vector& x0);
  double total_mass() const { return x.sum() + x_a.sum(); }
};

// Fractions of u may exceed x by at most this much (absolute); such inputs
// are clipped to x.
inline constexpr double kAdmissibilityTolerance = 1e-9;

// x <- A (x - u), x_a <- A_a (x_a + u). Throws ConstraintViolation naming the
// first offending bin when u < 0 or u > x.
PopulationState step_population(const PopulationState& state, const Vector& u,
                                const TransitionMatrix& nominal,
                                const TransitionMatrix& actuated);

// c_ON: p_on on every ON bin, zero on OFF bins.
struct OutputVector {
  Vector c;
  double p_on = 0.0;

  static OutputVector for_bins(std::size_t bins_per_mode, double p_on);
  static OutputVector for_grid(const BinGrid& grid, double p_on) {
    return for_bins(grid.bins_per_mode(), p_on);
  }
};

double aggregate_power(const PopulationState& state, const OutputVector& output);

// Dense row-major CSV preceded by '#'-comment header lines with the regime
// and grid. Values use 17 significant digits so a reload is bit-exact.
void write_transition_matrix_csv(std::ostream& out, const TransitionMatrix& matrix);
TransitionMatrix read_transition_matrix_csv(std::istream& in);

}  // namespace tclflex
