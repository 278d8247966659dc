#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "tclflex/errors.hpp"
#include "tclflex/markov.hpp"

using namespace tclflex;

namespace {

const Hours kMinute = std::chrono::minutes(1);

struct Defaults {
  BinGrid grid{18.0, 24.0, 40};
  ThermalRegime regime{20.0, 1.0, 32.0, kMinute};
  TransitionMatrix a = estimate_transition_matrix(TclParams{}, grid, regime, {4000, 1});
  StationaryResult stationary = stationary_distribution(a);
};

const Defaults& defaults() {
  static const Defaults d;
  return d;
}

TransitionMatrix actuated_defaults() {
  const auto& d = defaults();
  return estimate_transition_matrix(TclParams{}, d.grid, {22.0, 1.0, 32.0, kMinute}, {4000, 2});
}

}  // namespace

TEST(BinGrid, WidthAndDimension) {
  const auto g = build_grid(19.0, 23.0, 8);
  EXPECT_DOUBLE_EQ(g.width(), 0.5);
  EXPECT_EQ(g.size(), 16u);
}

TEST(BinGrid, BoundaryMapping) {
  const auto g = build_grid(19.0, 23.0, 8);
  EXPECT_EQ(g.index(19.0, false), 0u);
  EXPECT_EQ(g.index(std::nextafter(23.0, 0.0), true), 15u);
  EXPECT_EQ(g.index(23.0, true), 15u);
  EXPECT_EQ(g.index(10.0, false), 0u);
  EXPECT_EQ(g.index(40.0, false), 7u);
}

TEST(BinGrid, InteriorTemperaturesRoundTrip) {
  const auto g = build_grid(18.0, 24.0, 40);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> pick(0, 39);
  std::uniform_real_distribution<double> frac(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const auto bin = pick(rng);
    const double t = g.lower_edge(bin) + frac(rng) * g.width();
    EXPECT_EQ(g.temperature_bin(t), bin);
    EXPECT_EQ(g.index(t, true), bin + 40);
  }
}

TEST(BinGrid, InvalidGridsAndBands) {
  EXPECT_THROW(build_grid(20.0, 19.0, 8), InvalidInput);
  EXPECT_THROW(build_grid(19.0, 23.0, 1), InvalidInput);
  EXPECT_THROW(build_grid(19.0, 23.0, 8).require_band(22.8, 1.0), InvalidConfiguration);
  EXPECT_NO_THROW(build_grid(19.0, 23.0, 8).require_band(22.5, 1.0));
}

TEST(Estimation, ColumnsAreStochastic) {
  const auto& a = defaults().a;
  EXPECT_LE(a.max_column_error(), 1e-12);
  EXPECT_GE(a.entries().minCoeff(), 0.0);
  EXPECT_LE(a.entries().maxCoeff(), 1.0);
}

TEST(Estimation, OnBinsDriftCooler) {
  const auto& d = defaults();
  // ON bin holding 20.0..20.15, well inside the deadband.
  const auto col = static_cast<Eigen::Index>(d.grid.index(20.05, true));
  double cooler = 0.0, warmer = 0.0;
  for (Eigen::Index r = 0; r < d.a.size(); ++r) {
    const std::size_t bin = static_cast<std::size_t>(r) % 40;
    const std::size_t own = static_cast<std::size_t>(col) % 40;
    if (bin < own) cooler += d.a.entries()(r, col);
    if (bin > own) warmer += d.a.entries()(r, col);
  }
  EXPECT_GT(cooler, warmer);
}

TEST(Estimation, DoublingSamplesStaysWithinThreeSigma) {
  const auto& d = defaults();
  const auto twice = estimate_transition_matrix(TclParams{}, d.grid, d.regime, {8000, 1});
  const double n = 4000.0;
  for (Eigen::Index j = 0; j < d.a.size(); ++j) {
    for (Eigen::Index i = 0; i < d.a.size(); ++i) {
      const double p = twice.entries()(i, j);
      const double sigma = std::sqrt(p * (1.0 - p) / n);
      EXPECT_LE(std::abs(p - d.a.entries()(i, j)), 3.0 * sigma + 1e-15)
          << "entry (" << i << ", " << j << ")";
    }
  }
}

TEST(Estimation, SameSeedIsBitIdentical) {
  const auto& d = defaults();
  const auto again = estimate_transition_matrix(TclParams{}, d.grid, d.regime, {4000, 1});
  EXPECT_EQ(again.entries(), d.a.entries());
  EXPECT_THROW(estimate_transition_matrix(TclParams{}, d.grid, d.regime, {999, 1}), InvalidInput);
}

TEST(Stationary, IdentityReturnsStartAndFlagsNonUnique) {
  const TransitionMatrix id(Matrix::Identity(4, 4));
  Vector start(4);
  start << 0.1, 0.2, 0.3, 0.4;
  const auto r = stationary_distribution(id, start);
  EXPECT_LE((r.distribution - start).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(r.unique);
}

TEST(Stationary, TwoStateClosedForm) {
  Matrix m(2, 2);
  m << 0.9, 0.5, 0.1, 0.5;
  const auto r = stationary_distribution(TransitionMatrix(m));
  // Second eigenvalue 0.4, so 0.7 for the lazy chain: the error after stopping
  // is at most residual / 0.3.
  EXPECT_LE(r.residual, StationaryOptions{}.tolerance);
  const double bound = r.residual / 0.3 + 1e-15;
  EXPECT_NEAR(r.distribution(0), 5.0 / 6.0, bound);
  EXPECT_NEAR(r.distribution(1), 1.0 / 6.0, bound);
  EXPECT_TRUE(r.unique);
}

TEST(Stationary, DefaultsResidualAndMass) {
  const auto& s = defaults().stationary;
  EXPECT_LE(s.residual, 1e-10);
  EXPECT_NEAR(s.distribution.sum(), 1.0, 1e-12);
  EXPECT_GE(s.distribution.minCoeff(), 0.0);
  EXPECT_TRUE(s.unique);
}

TEST(Stationary, NominalPowerMatchesLongRunMicroMean) {
  const auto& d = defaults();
  FleetSpec spec;
  spec.n_units = 1000;
  spec.seed = 31;
  const auto fleet = sample_fleet(spec);
  const auto trace = simulate_fleet(fleet, {32.0, 1.0, kMinute, 24 * 60, false});
  const double micro = std::accumulate(trace.power_kw.begin() + 240, trace.power_kw.end(), 0.0) /
                       static_cast<double>(trace.power_kw.size() - 240);
  const auto c = OutputVector::for_grid(d.grid, fleet.capacity_kw());
  const double p_nom = c.c.dot(d.stationary.distribution);
  EXPECT_LT(std::abs(micro - p_nom) / p_nom, 0.05) << "micro " << micro << " Markov " << p_nom;
}

TEST(Population, ZeroInputFollowsAutonomousChain) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  Vector x = Vector::Zero(80);
  x(45) = 0.6;
  x(10) = 0.4;
  auto s = PopulationState{x, Vector::Zero(80)};
  const auto next = step_population(s, Vector::Zero(80), d.a, aa);
  EXPECT_LE((next.x - d.a.apply(x)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(next.x_a.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Population, FullActuationMovesAllMass) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  const auto s = PopulationState::from_stationary(d.stationary.distribution);
  const auto next = step_population(s, s.x, d.a, aa);
  EXPECT_LE(next.x.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(next.x_a.sum(), 1.0, 1e-12);
}

TEST(Population, InadmissibleInputNamesBin) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  const auto s = PopulationState::from_stationary(d.stationary.distribution);
  Vector u = Vector::Zero(80);
  Eigen::Index bin = 0;
  s.x.maxCoeff(&bin);
  u(bin) = s.x(bin) + 1e-3;
  try {
    step_population(s, u, d.a, aa);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_NE(std::string(e.what()).find(std::to_string(bin)), std::string::npos) << e.what();
  }
  u.setZero();
  u(0) = -1e-3;
  EXPECT_THROW(step_population(s, u, d.a, aa), ConstraintViolation);
}

TEST(Population, MassAndSignPreservedUnderRandomAdmissibleInput) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto s = PopulationState::from_stationary(d.stationary.distribution);
  for (int k = 0; k < 300; ++k) {
    Vector u(80);
    const double scale = unit(rng) < 0.1 ? 1.0 : 0.05;
    for (Eigen::Index i = 0; i < 80; ++i) u(i) = scale * unit(rng) * s.x(i);
    s = step_population(s, u, d.a, aa);
    ASSERT_NEAR(s.total_mass(), 1.0, 1e-9);
    ASSERT_GE(s.x.minCoeff(), 0.0);
    ASSERT_GE(s.x_a.minCoeff(), 0.0);
  }
}

TEST(Population, StructuralZeroAfterLargeSetpointStep) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  const auto c = OutputVector::for_grid(d.grid, 2500.0);
  EXPECT_LE(std::abs(c.c.dot(aa.apply(d.stationary.distribution))), 1e-12 * 2500.0);
}

// The overshoot needs enough bins to keep numerical diffusion below the
// rebound amplitude; 80 bins over the default range are used here.
TEST(Population, HalfActuationDropsThenOvershoots) {
  const BinGrid grid(18.0, 24.0, 80);
  const ThermalRegime base{20.0, 1.0, 32.0, kMinute};
  const auto a = estimate_transition_matrix(TclParams{}, grid, base, {4000, 1});
  const auto aa = estimate_transition_matrix(TclParams{}, grid, {22.0, 1.0, 32.0, kMinute}, {4000, 2});
  const auto x0 = stationary_distribution(a).distribution;
  const auto c = OutputVector::for_grid(grid, 1.0);
  const double p_nom = c.c.dot(x0);
  auto s = PopulationState::from_stationary(x0);
  s = step_population(s, 0.5 * x0, a, aa);
  std::vector<double> power{aggregate_power(s, c)};
  for (int k = 0; k < 480; ++k) {
    s = step_population(s, Vector::Zero(x0.size()), a, aa);
    power.push_back(aggregate_power(s, c));
  }
  const auto low = std::min_element(power.begin(), power.end());
  EXPECT_LT(low - power.begin(), 30);
  EXPECT_GT(*std::max_element(low, power.end()), p_nom);
}

TEST(Output, AggregatePowerBounds) {
  const auto c = OutputVector::for_bins(5, 100.0);
  EXPECT_EQ((c.c.array() != 0.0).count(), 5);
  Vector off = Vector::Zero(10);
  off.head(5).setConstant(0.2);
  EXPECT_EQ(aggregate_power({off, Vector::Zero(10)}, c), 0.0);
  Vector on = Vector::Zero(10);
  on.tail(5).setConstant(0.2);
  EXPECT_NEAR(aggregate_power({Vector::Zero(10), on}, c), 100.0, 1e-12);
}

TEST(Output, StationaryPowerIsConstant) {
  const auto& d = defaults();
  const auto aa = actuated_defaults();
  const auto c = OutputVector::for_grid(d.grid, 2500.0);
  auto s = PopulationState::from_stationary(d.stationary.distribution);
  const double p_nom = aggregate_power(s, c);
  for (int k = 0; k < 500; ++k) {
    s = step_population(s, Vector::Zero(80), d.a, aa);
    ASSERT_NEAR(aggregate_power(s, c), p_nom, 1e-8 * 2500.0);
  }
}

TEST(Serialization, MatrixRoundTripIsBitExact) {
  const auto& d = defaults();
  std::stringstream s;
  write_transition_matrix_csv(s, d.a);
  const auto back = read_transition_matrix_csv(s);
  EXPECT_EQ(back.entries(), d.a.entries());
  ASSERT_TRUE(back.grid().has_value());
  EXPECT_EQ(*back.grid(), d.grid);
  EXPECT_EQ(back.regime().t_set, 20.0);
  EXPECT_EQ(back.regime().dt.count(), kMinute.count());
}
