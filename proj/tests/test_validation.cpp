#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "tclflex/errors.hpp"
#include "tclflex/validation.hpp"

using namespace tclflex;

namespace {

const Hours kMinute = std::chrono::minutes(1);

ControlPlan single_bin_plan(double value, std::size_t steps, Eigen::Index dim = 4,
                            Eigen::Index bin = 1) {
  ControlPlan plan;
  for (std::size_t k = 0; k < steps; ++k) {
    Vector u = Vector::Zero(dim);
    u(bin) = value;
    plan.u.push_back(u);
  }
  return plan;
}

struct Setup {
  BinGrid grid{18.0, 24.0, 40};
  ReachHoldModel model = build_model(TclParams{}, grid, RegimeSpec{}, 250.0, {4000, 1}, false);
  Fleet fleet = [this] {
    FleetSpec spec;
    spec.n_units = 100;
    spec.heterogeneity = Heterogeneity::uniform(0.1);
    spec.seed = 2;
    return settle_fleet(sample_fleet(spec), 32.0, 1.0, kMinute, 240);
  }();
};

const Setup& setup() {
  static const Setup s;
  return s;
}

}  // namespace

TEST(Discretize, IntegerMultiplesAreExact) {
  ControlPlan plan;
  Vector u(3);
  u << 3.0 / 100.0, 0.0, 7.0 / 100.0;
  plan.u = {u, u};
  const auto d = discretize_plan(plan, 100);
  for (const auto& row : d.counts) EXPECT_EQ(row, (std::vector<std::int64_t>{3, 0, 7}));
  for (const auto& e : d.error) EXPECT_LE(e.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Discretize, FractionalCarryPattern) {
  // U = 0.4 per step: e runs 0, .4, .8, .2, .6, 0 so the counts repeat 0,0,1,0,1.
  const auto d = discretize_plan(single_bin_plan(0.4 / 50.0, 15), 50);
  const std::vector<std::int64_t> expected{0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 1};
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_EQ(d.counts[k][1], expected[k]) << "step " << k;
    EXPECT_LE(std::abs(static_cast<double>(d.cumulative(k)) - 0.4 * static_cast<double>(k + 1)),
              1.0);
  }
}

TEST(Discretize, TotalWithinBudgetAndFidelityBound) {
  const auto& s = setup();
  const auto response = proportional_response(response_kernels(s.model, 500), s.model.x0(), 250.0);
  const auto pt = inner_point(0.3 * s.model.p_nom(), response, s.model.x0(), 480);
  const auto d = discretize_plan(pt.plan, 1000);
  EXPECT_LE(d.total(), 1000);
  double target = 0.0;
  for (std::size_t k = 0; k < d.steps(); ++k) {
    target += 1000.0 * pt.plan.u[k].sum();
    EXPECT_LE(std::abs(static_cast<double>(d.cumulative(k)) - target),
              static_cast<double>(s.grid.size()));
    for (const auto c : d.counts[k]) EXPECT_GE(c, 0);
  }
  EXPECT_THROW(discretize_plan(pt.plan, 0), InvalidInput);
}

TEST(Micro, EmptyPlanReproducesBaseline) {
  const auto& s = setup();
  DiscretizedPlan none;
  none.counts.assign(10, std::vector<std::int64_t>(s.grid.size(), 0));
  const auto run = apply_plan_micro(s.fleet, none, s.grid, {32.0, 1.0, kMinute, 120, 22.0, 1});
  const auto base = simulate_fleet(s.fleet, {32.0, 1.0, kMinute, 120, false});
  EXPECT_EQ(run.power_kw, base.power_kw);
  EXPECT_EQ(run.requested, 0);
  EXPECT_FALSE(run.degraded());
}

TEST(Micro, ActuatingEveryUnitShedsAlmostAll) {
  const auto& s = setup();
  DiscretizedPlan all;
  all.counts.assign(1, std::vector<std::int64_t>(s.grid.size(), 0));
  for (const auto& st : s.fleet.states) ++all.counts[0][s.grid.index(st.t_air, st.on)];
  const auto run = apply_plan_micro(s.fleet, all, s.grid, {32.0, 1.0, kMinute, 30, 22.0, 1});
  EXPECT_EQ(run.delivered, 100);
  EXPECT_TRUE(run.shortfalls.empty());
  const double min_power = *std::min_element(run.power_kw.begin(), run.power_kw.begin() + 6);
  EXPECT_LE(min_power, 0.05 * s.fleet.capacity_kw());
  for (const auto& st : run.final_states) EXPECT_EQ(st.t_set, 22.0);
}

TEST(Micro, SeededSelectionIsDeterministicAndNeverRepeats) {
  const auto& s = setup();
  const auto response = proportional_response(response_kernels(s.model, 300), s.model.x0(), 250.0);
  const auto pt = inner_point(0.4 * s.model.p_nom(), response, s.model.x0(), 240);
  const auto d = discretize_plan(pt.plan, 100);
  const MicroOptions opts{32.0, 1.0, kMinute, 240, 22.0, 9};
  const auto a = apply_plan_micro(s.fleet, d, s.grid, opts);
  const auto b = apply_plan_micro(s.fleet, d, s.grid, opts);
  EXPECT_EQ(a.power_kw, b.power_kw);
  EXPECT_EQ(a.delivered, b.delivered);
  // A unit changes setpoint at most once, so delivered never exceeds the fleet.
  EXPECT_LE(a.delivered, 100);
  std::size_t moved = 0;
  for (const auto& st : a.final_states) moved += st.t_set == 22.0 ? 1 : 0;
  EXPECT_EQ(static_cast<std::int64_t>(moved), a.delivered);
}

TEST(Micro, ShortfallsAreLoggedAndDegrade) {
  const auto& s = setup();
  DiscretizedPlan greedy;
  greedy.counts.assign(1, std::vector<std::int64_t>(s.grid.size(), 0));
  greedy.counts[0][0] = 50;  // the coldest OFF bin is empty after settling
  const auto run = apply_plan_micro(s.fleet, greedy, s.grid, {32.0, 1.0, kMinute, 5, 22.0, 1});
  ASSERT_EQ(run.shortfalls.size(), 1u);
  EXPECT_EQ(run.shortfalls[0].bin, 0u);
  EXPECT_EQ(run.shortfalls[0].requested, 50);
  EXPECT_TRUE(run.degraded());
}

TEST(Compare, IdenticalAndOffsetTraces) {
  const std::vector<double> a{5.0, 4.0, 3.0, 3.0};
  const auto same = compare_traces(a, a, 10.0, 5.0, 1.0, 3, 0.1);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.max_abs_dev, 0.0);
  EXPECT_EQ(same.hold_satisfied_fraction, 1.0);
  std::vector<double> b = a;
  for (auto& v : b) v += 2.5;
  const auto off = compare_traces(a, b, 10.0, 5.0, 1.0, 3, 0.1);
  EXPECT_NEAR(off.max_abs_dev, 0.25, 1e-15);
  EXPECT_NEAR(off.rmse, 0.25, 1e-15);
  const std::vector<double> shorter{1.0};
  EXPECT_THROW(compare_traces(a, shorter, 10.0, 5.0, 1.0, 3, 0.1), InvalidInput);
}

TEST(Compare, HoldFractionCountsSteps) {
  const std::vector<double> markov{10, 6, 6, 6, 6};
  const std::vector<double> micro{10, 6, 9, 6, 6};
  // Reference 10, hold 4 with tolerance 0.5: step 2 sheds only 1.
  const auto r = compare_traces(markov, micro, 20.0, 10.0, 4.0, 4, 0.5);
  EXPECT_NEAR(r.hold_satisfied_fraction, 0.75, 1e-15);
}

TEST(Micro, AgreementImprovesWithFleetSize) {
  // Homogeneous fleets started from the Markov stationary distribution, 30%
  // of the population actuated at once; RMSE averaged over three seeds.
  const BinGrid grid(18.0, 24.0, 40);
  auto rmse_for = [&](std::size_t n) {
    const double p_on = 2.5 * static_cast<double>(n);
    const auto model = build_model(TclParams{}, grid, RegimeSpec{}, p_on, {4000, 1}, false);
    const auto plan = ControlPlan::proportional({0.3}, model.x0());
    const auto markov = markov_power_trace(model, plan, 240);
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      FleetSpec spec;
      spec.n_units = n;
      spec.seed = seed;
      const auto fleet = initialize_from_distribution(sample_fleet(spec), grid, model.x0(), seed);
      const auto d = discretize_plan(plan, n);
      const auto micro = apply_plan_micro(fleet, d, grid, {32.0, 1.0, kMinute, 240, 22.0, seed});
      total += compare_traces(markov, micro.power_kw, p_on, 0.0, 0.0, 0, 0.0).rmse;
    }
    return total / 3.0;
  };
  const double r100 = rmse_for(100);
  const double r1000 = rmse_for(1000);
  const double r10000 = rmse_for(10000);
  RecordProperty("rmse_100", std::to_string(r100));
  RecordProperty("rmse_1000", std::to_string(r1000));
  RecordProperty("rmse_10000", std::to_string(r10000));
  EXPECT_GE(r100, r1000);
  EXPECT_GE(r1000, r10000);
}

TEST(Micro, InitialisationFollowsDistribution) {
  const BinGrid grid(18.0, 24.0, 40);
  Vector x = Vector::Zero(80);
  x(10) = 0.25;
  x(55) = 0.75;
  FleetSpec spec;
  spec.n_units = 4000;
  spec.seed = 1;
  const auto fleet = initialize_from_distribution(sample_fleet(spec), grid, x, 3);
  std::size_t in_on = 0;
  for (const auto& st : fleet.states) {
    const auto idx = grid.index(st.t_air, st.on);
    ASSERT_TRUE(idx == 10 || idx == 55);
    in_on += idx == 55 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(in_on) / 4000.0, 0.75, 0.03);
  EXPECT_THROW(initialize_from_distribution(sample_fleet(spec), grid, Vector::Zero(80), 3),
               InvalidInput);
}

TEST(Micro, PairedTraceCsv) {
  std::ostringstream out;
  const std::vector<double> a{1.0, 2.0};
  write_paired_trace_csv(out, a, a);
  EXPECT_EQ(out.str(), "step,markov_kW,micro_kW\n0,1,1\n1,2,2\n");
}
