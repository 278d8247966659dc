#include "tclflex/reachhold.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "parallel.hpp"
#include "tclflex/errors.hpp"
#include "tclflex/io.hpp"

namespace tclflex {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

ThermalRegime thermal(double t_set, double deadband, const RegimeSpec& regime) {
  return ThermalRegime{t_set, deadband, regime.t_amb, regime.dt};
}

struct AlgorithmRun {
  std::vector<double> alpha;
  std::size_t t_hold = 0;
  std::size_t t_depleted = 0;
  bool horizon_limited = false;
};

constexpr double kBudgetSlack = 1e-9;

AlgorithmRun run_algorithm(double p_hold, const ProportionalResponse& response,
                           std::size_t t_max) {
  if (!(p_hold >= 0.0) || p_hold > response.p_nom * (1.0 + 1e-12)) {
    throw InvalidInput("P_hold " + std::to_string(p_hold) + " outside [0, P_nom]");
  }
  if (response.horizon() < t_max + 1) throw InvalidInput("response horizon shorter than t_max + 1");

  AlgorithmRun run;
  run.t_depleted = t_max + 1;
  double cumulative = 0.0;
  for (std::size_t k = 0; k <= t_max; ++k) {
    const double a = std::max(alpha_lower_bound(k, run.alpha, p_hold, response), 0.0);
    run.alpha.push_back(a);
    cumulative += a;
    // A residue at round-off level is the stationary error showing through
    // nom[1] - act[1]; it is spent now rather than dribbled out later.
    if (cumulative >= 1.0 - kBudgetSlack) {
      run.alpha.back() -= cumulative - 1.0;
      run.t_depleted = k;
      break;
    }
  }

  run.t_hold = t_max;
  run.horizon_limited = true;
  if (run.t_depleted > t_max) return run;
  const double tol = 1e-12 * response.p_on;
  for (std::size_t k = run.t_depleted + 1; k <= t_max; ++k) {
    double dp = 0.0;
    for (std::size_t n = 0; n < run.alpha.size(); ++n) {
      dp += run.alpha[n] * (response.nominal[k - n] - response.actuated[k - n]);
    }
    if (dp < p_hold - tol) {
      run.t_hold = k - 1;
      run.horizon_limited = false;
      break;
    }
  }
  return run;
}

lp::LpSolution solve_checked(const lp::LinearProgram& program, const std::string& what) {
  auto solution = lp::solve(program);
  if (solution.status != lp::LpStatus::optimal) {
    throw NumericalFailure(what + ": LP " + lp::to_string(solution.status) +
                           (solution.message.empty() ? "" : " (" + solution.message + ")"));
  }
  return solution;
}

}  // namespace

TransitionMatrix build_fictitious_system(const TclParams& params, const BinGrid& grid,
                                         const RegimeSpec& regime,
                                         const EstimationSettings& settings) {
  if (grid.width() > regime.deadband) {
    throw InvalidConfiguration("bin width exceeds the deadband; nothing to squeeze");
  }
  return estimate_transition_matrix(
      params, grid, thermal(regime.t_set - 0.5 * regime.deadband, grid.width(), regime), settings);
}

ReachHoldModel build_model(const TclParams& params, const BinGrid& grid,
                           const RegimeSpec& regime, double p_on_kw,
                           const EstimationSettings& settings, bool with_squeezed) {
  if (!(p_on_kw > 0.0)) throw InvalidConfiguration("fleet capacity must be positive");
  grid.require_band(regime.t_set, regime.deadband);
  grid.require_band(regime.t_set_new, regime.deadband);

  auto nominal = estimate_transition_matrix(params, grid,
                                            thermal(regime.t_set, regime.deadband, regime),
                                            settings);
  auto actuated = estimate_transition_matrix(
      params, grid, thermal(regime.t_set_new, regime.deadband, regime),
      EstimationSettings{settings.samples_per_bin, settings.seed + 1});
  std::optional<TransitionMatrix> squeezed;
  if (with_squeezed) {
    squeezed = build_fictitious_system(
        params, grid, regime, EstimationSettings{settings.samples_per_bin, settings.seed + 2});
  }
  auto stationary = stationary_distribution(nominal);
  return ReachHoldModel{params,
                        grid,
                        regime,
                        std::move(nominal),
                        std::move(actuated),
                        std::move(squeezed),
                        OutputVector::for_grid(grid, p_on_kw),
                        std::move(stationary)};
}

Kernels response_kernels(const TransitionMatrix& nominal, const TransitionMatrix& actuated,
                         const TransitionMatrix* squeezed, const OutputVector& output,
                         std::size_t horizon) {
  const Index n = nominal.size();
  if (actuated.size() != n || output.c.size() != n || (squeezed && squeezed->size() != n)) {
    throw InvalidInput("kernel inputs differ in dimension");
  }
  auto powers = [&](const Matrix& m) {
    Matrix rows(idx(horizon) + 1, n);
    rows.row(0) = output.c.transpose();
    for (Index k = 1; k <= idx(horizon); ++k) rows.row(k) = rows.row(k - 1) * m;
    return rows;
  };
  Kernels kernels;
  kernels.h = powers(nominal.entries());
  kernels.h_a = powers(actuated.entries());
  if (squeezed) kernels.h_out = powers(squeezed->entries());
  return kernels;
}

Kernels response_kernels(const ReachHoldModel& model, std::size_t horizon) {
  return response_kernels(model.nominal, model.actuated,
                          model.squeezed ? &*model.squeezed : nullptr, model.output, horizon);
}

ControlPlan ControlPlan::proportional(std::vector<double> alpha, const Vector& x0) {
  ControlPlan plan;
  plan.u.reserve(alpha.size());
  for (const double a : alpha) plan.u.push_back(a * x0);
  plan.alpha = std::move(alpha);
  return plan;
}

double ControlPlan::budget() const {
  double total = 0.0;
  for (const auto& v : u) total += v.sum();
  return total;
}

Vector delta_p(const ControlPlan& plan, const Kernels& kernels, std::size_t horizon) {
  if (horizon > kernels.horizon()) throw InvalidInput("horizon exceeds kernel horizon");
  if (plan.steps() > kernels.horizon()) throw InvalidInput("plan longer than kernel horizon");
  const Matrix diff = kernels.h - kernels.h_a;
  Vector dp = Vector::Zero(idx(horizon) + 1);
  for (std::size_t k = 1; k <= horizon; ++k) {
    double sum = 0.0;
    const std::size_t last = std::min(k, plan.steps());
    for (std::size_t n = 0; n < last; ++n) sum += diff.row(idx(k - n)).dot(plan.u[n]);
    dp(idx(k)) = sum;
  }
  return dp;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::exact: return "exact";
    case Method::inner: return "inner";
    case Method::outer: return "outer";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "exact") return Method::exact;
  if (text == "inner") return Method::inner;
  if (text == "outer") return Method::outer;
  throw InvalidInput("unknown method '" + std::string(text) + "'");
}

bool ReachHoldSet::monotone() const {
  const double tol = 1e-12 * std::max(1.0, p_on_kw);
  for (std::size_t i = 1; i < boundary.size(); ++i) {
    if (boundary[i].p_hold_kw > boundary[i - 1].p_hold_kw + tol) return false;
  }
  return true;
}

void ReachHoldSet::sort() {
  std::stable_sort(boundary.begin(), boundary.end(), [](const auto& a, const auto& b) {
    if (a.t_hold_steps != b.t_hold_steps) return a.t_hold_steps < b.t_hold_steps;
    return a.p_hold_kw > b.p_hold_kw;
  });
}

ExactResult solve_exact(std::size_t t_hold, const Kernels& kernels, const Vector& x0,
                        const TransitionMatrix& nominal) {
  const Index n = nominal.size();
  const std::size_t t = t_hold;
  if (t == 0) throw InvalidInput("exact LP needs t_hold >= 1");
  if (t * static_cast<std::size_t>(n) > kExactVariableCap) {
    throw InvalidInput("exact LP with t_hold " + std::to_string(t) + " and " + std::to_string(n) +
                       " states exceeds the variable cap");
  }
  if (t > kernels.horizon()) throw InvalidInput("kernels shorter than t_hold");
  const Index vars = idx(t) * n + 1;
  const Index rows = idx(t) + idx(t) * n;
  if (static_cast<double>(rows) * static_cast<double>(vars) > 1.5e8) {
    throw NumericalFailure("exact LP too large for the dense solver");
  }
  const double p_on = kernels.h.row(0).maxCoeff();
  if (!(p_on > 0.0)) throw InvalidConfiguration("output vector is zero");
  const Index p_col = vars - 1;

  lp::LinearProgram program = lp::LinearProgram::nonnegative(vars);
  program.objective(p_col) = 1.0;
  program.g = Matrix::Zero(rows, vars);
  program.h = Vector::Zero(rows);

  const Matrix diff = (kernels.h - kernels.h_a) / p_on;
  for (Index k = 1; k <= idx(t); ++k) {
    const Index row = k - 1;
    program.g(row, p_col) = 1.0;
    for (Index m = 0; m < k; ++m) program.g.block(row, m * n, 1, n) = -diff.row(k - m);
  }

  // u[k] <= x[k] = A^k x0 - sum_{m<k} A^{k-m} u[m]
  std::vector<Matrix> powers{Matrix::Identity(n, n)};
  for (std::size_t j = 1; j < t; ++j) powers.push_back(nominal.entries() * powers.back());
  Vector free_state = x0;
  for (Index k = 0; k < idx(t); ++k) {
    const Index top = idx(t) + k * n;
    program.g.block(top, k * n, n, n) = Matrix::Identity(n, n);
    for (Index m = 0; m < k; ++m) {
      program.g.block(top, m * n, n, n) = powers[static_cast<std::size_t>(k - m)];
    }
    program.h.segment(top, n) = free_state;
    free_state = nominal.apply(free_state);
  }

  ExactResult result;
  result.lp = solve_checked(program, "exact reach-and-hold, t_hold " + std::to_string(t));
  for (Index k = 0; k < idx(t); ++k) {
    result.plan.u.push_back(result.lp.z.segment(k * n, n).cwiseMax(0.0));
  }
  result.p_hold_kw = result.lp.z(p_col) * p_on;
  return result;
}

ProportionalResponse proportional_response(const Kernels& kernels, const Vector& x0,
                                           double p_on) {
  ProportionalResponse r;
  const Index rows = kernels.h.rows();
  r.nominal.resize(static_cast<std::size_t>(rows));
  r.actuated.resize(static_cast<std::size_t>(rows));
  for (Index m = 0; m < rows; ++m) {
    r.nominal[static_cast<std::size_t>(m)] = kernels.h.row(m).dot(x0);
    r.actuated[static_cast<std::size_t>(m)] = kernels.h_a.row(m).dot(x0);
  }
  r.p_nom = r.nominal[0];
  r.p_on = p_on;
  return r;
}

double alpha_lower_bound(std::size_t k, std::span<const double> alpha, double p_hold,
                         const ProportionalResponse& response) {
  if (!(response.p_nom > 0.0)) throw InvalidConfiguration("P_nom must be positive");
  if (alpha.size() < k) throw InvalidInput("alpha history shorter than k");
  if (response.horizon() < k + 1) throw InvalidInput("response horizon too short");
  const double first = response.nominal[1] - response.actuated[1];
  if (!(first > 0.0)) {
    throw InvalidConfiguration("actuation does not reduce next-step power");
  }
  double shortfall = p_hold;
  for (std::size_t n = 0; n < k; ++n) {
    shortfall -= alpha[n] * (response.nominal[k + 1 - n] - response.actuated[k + 1 - n]);
  }
  return shortfall / first;
}

InnerPoint inner_point(double p_hold_kw, const ProportionalResponse& response, const Vector& x0,
                       std::size_t t_max) {
  auto run = run_algorithm(p_hold_kw, response, t_max);
  InnerPoint point;
  point.p_hold_kw = p_hold_kw;
  point.t_hold = run.t_hold;
  point.t_depleted = run.t_depleted;
  point.horizon_limited = run.horizon_limited;
  point.plan = ControlPlan::proportional(std::move(run.alpha), x0);
  return point;
}

double inner_value_at(std::size_t t_steps, const ProportionalResponse& response,
                      std::size_t t_max) {
  if (t_steps > t_max) return 0.0;
  if (run_algorithm(response.p_nom, response, t_max).t_hold >= t_steps) return response.p_nom;
  double lo = 0.0;
  double hi = response.p_nom;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (run_algorithm(mid, response, t_max).t_hold >= t_steps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::vector<double> default_p_grid(double p_nom, std::size_t n) {
  std::vector<double> grid;
  for (std::size_t i = 1; i <= n; ++i) {
    grid.push_back(p_nom * static_cast<double>(i) / static_cast<double>(n));
  }
  return grid;
}

ReachHoldSet inner_boundary(std::span<const double> p_grid, const ProportionalResponse& response,
                            std::size_t t_max, Hours dt) {
  std::vector<ReachHoldPoint> points(p_grid.size());
  detail::parallel_for(p_grid.size(), [&](std::size_t i) {
    const auto run = run_algorithm(p_grid[i], response, t_max);
    points[i] = ReachHoldPoint{p_grid[i], run.t_hold, Method::inner, run.horizon_limited};
  });
  ReachHoldSet set;
  set.method = Method::inner;
  set.boundary = std::move(points);
  set.dt = dt;
  set.p_nom_kw = response.p_nom;
  set.p_on_kw = response.p_on;
  set.sort();
  return set;
}

Vector squeezed_start(const BinGrid& grid, double t_set, double deadband) {
  const double t = t_set - 0.5 * deadband;
  const double position = (t - grid.t_min()) / grid.width();
  auto bin = static_cast<long>(std::floor(position));
  if (std::abs(position - std::round(position)) < 1e-9) bin = std::lround(position) - 1;
  bin = std::clamp<long>(bin, 0, static_cast<long>(grid.bins_per_mode()) - 1);
  Vector x = Vector::Zero(idx(grid.size()));
  x(idx(grid.bins_per_mode()) + bin) = 1.0;
  return x;
}

std::vector<std::size_t> reachable_support(const TransitionMatrix& squeezed, const Vector& x_out) {
  const auto limit = stationary_distribution(squeezed, x_out).distribution;
  std::vector<std::size_t> support;
  for (Index i = 0; i < limit.size(); ++i) {
    if (limit(i) > 1e-12 || x_out(i) > 0.0) support.push_back(static_cast<std::size_t>(i));
  }
  return support;
}

OuterResult solve_outer(std::size_t t_hold, const Kernels& kernels,
                        std::span<const std::size_t> support) {
  if (!kernels.has_squeezed()) throw InvalidInput("outer LP needs the squeezed kernels");
  if (t_hold == 0) throw InvalidInput("outer LP needs t_hold >= 1");
  if (t_hold > kernels.horizon()) throw InvalidInput("kernels shorter than t_hold");
  const Index n = kernels.h.cols();
  std::vector<std::size_t> bins(support.begin(), support.end());
  if (bins.empty()) {
    for (Index i = 0; i < n; ++i) bins.push_back(static_cast<std::size_t>(i));
  }
  const Index s = idx(bins.size());
  const Index t = idx(t_hold);
  const double p_on = kernels.h.row(0).maxCoeff();
  if (!(p_on > 0.0)) throw InvalidConfiguration("output vector is zero");

  const Index vars = t * s + 1;
  const Index p_col = vars - 1;
  lp::LinearProgram program = lp::LinearProgram::nonnegative(vars);
  program.objective(p_col) = 1.0;
  program.g = Matrix::Zero(t + 1, vars);
  program.h = Vector::Zero(t + 1);
  const Matrix diff = (kernels.h_out - kernels.h_a) / p_on;
  for (Index k = 1; k <= t; ++k) {
    program.g(k - 1, p_col) = 1.0;
    for (Index m = 0; m < k; ++m) {
      for (Index j = 0; j < s; ++j) {
        program.g(k - 1, m * s + j) = -diff(k - m, idx(bins[static_cast<std::size_t>(j)]));
      }
    }
  }
  program.g.row(t).head(vars - 1).setOnes();
  program.h(t) = 1.0;

  OuterResult result;
  result.lp = solve_checked(program, "outer reach-and-hold, t_hold " + std::to_string(t_hold));
  for (Index k = 0; k < t; ++k) {
    Vector u = Vector::Zero(n);
    for (Index j = 0; j < s; ++j) {
      u(idx(bins[static_cast<std::size_t>(j)])) = std::max(0.0, result.lp.z(k * s + j));
    }
    result.plan.u.push_back(std::move(u));
  }
  result.p_hold_kw = result.lp.z(p_col) * p_on;
  result.support = std::move(bins);
  return result;
}

OuterConditionReport check_outer_condition(const Kernels& kernels, const Vector& x_out,
                                           std::size_t horizon) {
  if (!kernels.has_squeezed()) throw InvalidInput("condition check needs the squeezed kernels");
  if (horizon > kernels.horizon()) throw InvalidInput("kernels shorter than the scan horizon");
  const double tol = 1e-9 * std::max(1.0, kernels.h.row(0).maxCoeff());
  OuterConditionReport report;
  report.horizon = horizon;
  report.worst_margin_kw = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m <= horizon; ++m) {
    const Index r = idx(m);
    const double hx = (kernels.h_out.row(r) - kernels.h_a.row(r)).dot(x_out);
    Index bin = 0;
    const double worst = (kernels.h.row(r) - kernels.h_a.row(r)).maxCoeff(&bin);
    const double margin = hx - worst;
    if (margin < -tol) ++report.violating_steps;
    if (margin < report.worst_margin_kw) {
      report.worst_margin_kw = margin;
      report.worst_step = m;
      report.worst_bin = static_cast<std::size_t>(bin);
    }
  }
  if (horizon == 0) report.worst_margin_kw = 0.0;
  report.holds = report.violating_steps == 0;
  return report;
}

void write_reachhold_csv(std::ostream& out, const ReachHoldSet& set) {
  out << "T_hold_steps,T_hold_hours,P_hold_kW,method\n";
  for (const auto& p : set.boundary) {
    out << p.t_hold_steps << ',' << io::exact(static_cast<double>(p.t_hold_steps) * set.dt.count())
        << ',' << io::exact(p.p_hold_kw) << ',' << to_string(p.method) << '\n';
  }
}

ReachHoldSet read_reachhold_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty reach-and-hold CSV");
  const auto header = io::split_csv(line);
  if (header != std::vector<std::string>{"T_hold_steps", "T_hold_hours", "P_hold_kW", "method"}) {
    throw InvalidInput("unexpected reach-and-hold CSV header: " + line);
  }
  ReachHoldSet set;
  bool dt_known = false;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = io::split_csv(line);
    const std::string where = "reach-and-hold CSV row " + std::to_string(row);
    if (cells.size() != 4) throw InvalidInput(where + ": expected 4 columns");
    const double steps = io::parse_double(cells[0], where);
    if (steps < 0 || steps != std::floor(steps)) throw InvalidInput(where + ": bad step count");
    const double hours = io::parse_double(cells[1], where);
    ReachHoldPoint p;
    p.t_hold_steps = static_cast<std::size_t>(steps);
    p.p_hold_kw = io::parse_double(cells[2], where);
    p.method = parse_method(cells[3]);
    if (set.boundary.empty()) set.method = p.method;
    if (steps > 0) {
      const Hours dt(hours / steps);
      if (!dt_known) {
        set.dt = dt;
        dt_known = true;
      } else if (std::abs(dt.count() - set.dt.count()) > 1e-9 * set.dt.count()) {
        throw InvalidInput(where + ": inconsistent time step");
      }
    }
    set.p_on_kw = std::max(set.p_on_kw, p.p_hold_kw);
    set.p_nom_kw = std::max(set.p_nom_kw, p.p_hold_kw);
    set.boundary.push_back(p);
  }
  set.sort();
  return set;
}

}  // namespace tclflex
