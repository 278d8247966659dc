#include "tclflex/markov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "parallel.hpp"
#include "tclflex/errors.hpp"
#include "tclflex/io.hpp"

namespace tclflex {

BinGrid::BinGrid(double t_min, double t_max, std::size_t bins_per_mode)
    : t_min_(t_min), t_max_(t_max), bins_(bins_per_mode) {
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !(t_min < t_max)) {
    throw InvalidInput("bin grid requires finite t_min < t_max");
  }
  if (bins_per_mode < 2) throw InvalidInput("bin grid requires at least 2 bins");
}

double BinGrid::lower_edge(std::size_t bin) const {
  if (bin >= bins_) return t_max_;
  return t_min_ + (t_max_ - t_min_) * static_cast<double>(bin) /
                      static_cast<double>(bins_);
}

std::size_t BinGrid::temperature_bin(double t_air) const {
  if (!(t_air > t_min_)) return 0;  // also catches NaN
  if (t_air >= t_max_) return bins_ - 1;
  auto i = static_cast<std::size_t>(std::floor((t_air - t_min_) / width()));
  i = std::min(i, bins_ - 1);
  // Reconcile the division with lower_edge() so edges map consistently.
  while (i + 1 < bins_ && t_air >= lower_edge(i + 1)) ++i;
  while (i > 0 && t_air < lower_edge(i)) --i;
  return i;
}

std::size_t BinGrid::index(double t_air, bool on) const {
  return temperature_bin(t_air) + (on ? bins_ : 0);
}

void BinGrid::require_band(double t_set, double deadband) const {
  const double lo = t_set - 0.5 * deadband;
  const double hi = t_set + 0.5 * deadband;
  if (!(lo >= t_min_ && hi <= t_max_)) {
    std::ostringstream msg;
    msg << "deadband [" << lo << ", " << hi << "] is not contained in the bin grid ["
        << t_min_ << ", " << t_max_ << "]";
    throw InvalidConfiguration(msg.str());
  }
}

BinGrid build_grid(double t_min, double t_max, std::size_t bins_per_mode) {
  return BinGrid(t_min, t_max, bins_per_mode);
}

TransitionMatrix::TransitionMatrix(Matrix entries, std::optional<BinGrid> grid,
                                   ThermalRegime regime)
    : entries_(std::move(entries)), grid_(std::move(grid)), regime_(regime) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw InvalidInput("transition matrix must be square and non-empty");
  }
  if (grid_ && static_cast<Eigen::Index>(grid_->size()) != entries_.rows()) {
    throw InvalidInput("transition matrix dimension does not match its grid");
  }
  if (!entries_.allFinite() || entries_.minCoeff() < 0.0 || entries_.maxCoeff() > 1.0) {
    throw InvalidInput("transition matrix entries must lie in [0, 1]");
  }
  if (max_column_error() > kColumnTolerance) {
    throw InvalidInput("transition matrix is not column-stochastic");
  }
}

double TransitionMatrix::max_column_error() const {
  return (entries_.colwise().sum().array() - 1.0).abs().maxCoeff();
}

TransitionMatrix estimate_transition_matrix(const TclParams& params,
                                            const BinGrid& grid,
                                            const ThermalRegime& regime,
                                            const EstimationSettings& settings) {
  params.validate();
  grid.require_band(regime.t_set, regime.deadband);
  if (settings.samples_per_bin < 1000) {
    throw InvalidInput("transition estimation needs at least 1000 samples per bin");
  }
  const EtpPropagator prop(params, regime.t_amb, regime.dt);
  const std::size_t n = grid.size();
  const std::size_t per_mode = grid.bins_per_mode();
  Matrix entries = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  detail::parallel_for(n, [&](std::size_t col) {
    std::seed_seq seq{static_cast<std::uint32_t>(settings.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(settings.seed >> 32),
                      static_cast<std::uint32_t>(col)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool on = col >= per_mode;
    const std::size_t bin = col % per_mode;
    const double lo = grid.lower_edge(bin);
    const double width = grid.upper_edge(bin) - lo;

    std::vector<std::size_t> counts(n, 0);
    for (std::size_t s = 0; s < settings.samples_per_bin; ++s) {
      TclState st;
      st.t_air = lo + width * unit(rng);
      st.t_mass = st.t_air + params.q_mass / params.hm;
      st.on = on;
      st.t_set = regime.t_set;
      const TclState next = prop.step(st, regime.deadband);
      ++counts[grid.index(next.t_air, next.on)];
    }
    const auto c = static_cast<Eigen::Index>(col);
    std::size_t total = 0;
    for (auto v : counts) total += v;
    if (total == 0) {
      entries(c, c) = 1.0;  // unreachable bin: self-loop
      return;
    }
    for (std::size_t j = 0; j < n; ++j) {
      entries(static_cast<Eigen::Index>(j), c) =
          static_cast<double>(counts[j]) / static_cast<double>(total);
    }
  });
  return TransitionMatrix(std::move(entries), grid, regime);
}

namespace {

// Number of closed communicating classes of the chain (edge j <- i when
// P(j, i) > 0), via Tarjan's strongly-connected components.
std::size_t closed_class_count(const Matrix& p) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0) {
        succ[i].push_back(j);
      }
    }
  }
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  int counter = 0, components = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (auto w : succ[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      while (true) {
        const auto w = stack.back();
        stack.pop_back();
        on_stack[w] = 0;
        comp[w] = components;
        if (w == v) break;
      }
      ++components;
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] < 0) visit(v);
  }
  std::vector<char> leaks(static_cast<std::size_t>(components), 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (auto w : succ[v]) {
      if (comp[w] != comp[v]) leaks[static_cast<std::size_t>(comp[v])] = 1;
    }
  }
  return static_cast<std::size_t>(std::count(leaks.begin(), leaks.end(), 0));
}

}  // namespace

Vector deadband_start(const BinGrid& grid, double t_set, double deadband) {
  const std::size_t per_mode = grid.bins_per_mode();
  Vector start = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
  const double lo = t_set - 0.5 * deadband;
  const double hi = t_set + 0.5 * deadband;
  for (std::size_t i = 0; i < per_mode; ++i) {
    const double centre = 0.5 * (grid.lower_edge(i) + grid.upper_edge(i));
    if (centre >= lo && centre <= hi) {
      start(static_cast<Eigen::Index>(i)) = 1.0;
      start(static_cast<Eigen::Index>(i + per_mode)) = 1.0;
    }
  }
  if (start.sum() == 0.0) {
    const auto i = grid.temperature_bin(t_set);
    start(static_cast<Eigen::Index>(i)) = 1.0;
    start(static_cast<Eigen::Index>(i + per_mode)) = 1.0;
  }
  return start / start.sum();
}

StationaryResult stationary_distribution(const TransitionMatrix& matrix,
                                         std::optional<Vector> start,
                                         const StationaryOptions& options) {
  const Matrix& p = matrix.entries();
  const Eigen::Index n = p.rows();
  Vector x;
  if (start) {
    x = *start;
    if (x.size() != n || !x.allFinite() || x.minCoeff() < 0.0 || x.sum() <= 0.0) {
      throw InvalidInput("stationary start vector must be nonnegative with positive mass");
    }
  } else if (matrix.grid() && matrix.regime().deadband > 0.0) {
    x = deadband_start(*matrix.grid(), matrix.regime().t_set, matrix.regime().deadband);
  } else {
    x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  }
  x /= x.sum();

  StationaryResult result;
  result.unique = closed_class_count(p) == 1;
  Vector px = p * x;
  double residual = (px - x).lpNorm<Eigen::Infinity>();
  std::size_t it = 0;
  while (residual > options.tolerance && it < options.max_iterations) {
    x = 0.5 * (x + px);
    x = x.cwiseMax(0.0);
    x /= x.sum();
    px.noalias() = p * x;
    residual = (px - x).lpNorm<Eigen::Infinity>();
    ++it;
  }
  result.distribution = std::move(x);
  result.residual = residual;
  result.iterations = it;
  if (residual > options.max_residual) {
    std::ostringstream msg;
    msg << "stationary distribution did not converge: residual " << residual
        << " after " << it << " iterations";
    throw NumericalFailure(msg.str());
  }
  return result;
}

PopulationState PopulationState::from_stationary(const Vector& x0) {
  return PopulationState{x0, Vector::Zero(x0.size())};
}

PopulationState step_population(const PopulationState& state, const Vector& u,
                                const TransitionMatrix& nominal,
                                const TransitionMatrix& actuated) {
  const Eigen::Index n = nominal.size();
  if (actuated.size() != n || state.x.size() != n || state.x_a.size() != n ||
      u.size() != n) {
    throw InvalidInput("population step dimension mismatch");
  }
  Vector moved = u;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(u(i)) || u(i) < -kAdmissibilityTolerance) {
      std::ostringstream msg;
      msg << "control input is negative in bin " << i << " (u = " << u(i) << ")";
      throw ConstraintViolation(msg.str());
    }
    if (u(i) > state.x(i) + kAdmissibilityTolerance) {
      std::ostringstream msg;
      msg << "control input exceeds the available population in bin " << i
          << " (u = " << u(i) << ", x = " << state.x(i) << ")";
      throw ConstraintViolation(msg.str());
    }
    moved(i) = std::clamp(u(i), 0.0, std::max(state.x(i), 0.0));
  }
  PopulationState next;
  next.x = nominal.entries() * (state.x - moved);
  next.x_a = actuated.entries() * (state.x_a + moved);
  return next;
}

OutputVector OutputVector::for_bins(std::size_t bins_per_mode, double p_on) {
  if (!(p_on > 0.0) || !std::isfinite(p_on)) {
    throw InvalidInput("fleet capacity P_ON must be finite and > 0");
  }
  const auto n = static_cast<Eigen::Index>(bins_per_mode);
  OutputVector out;
  out.c = Vector::Zero(2 * n);
  out.c.tail(n).setConstant(p_on);
  out.p_on = p_on;
  return out;
}

double aggregate_power(const PopulationState& state, const OutputVector& output) {
  return output.c.dot(state.x + state.x_a);
}

void write_transition_matrix_csv(std::ostream& out, const TransitionMatrix& matrix) {
  const auto& r = matrix.regime();
  out << "# tclflex transition matrix\n";
  out << "# dt_minutes=" << io::exact(std::chrono::duration<double, std::ratio<60>>(r.dt).count())
      << "\n";
  out << "# t_set=" << io::exact(r.t_set) << "\n";
  out << "# deadband=" << io::exact(r.deadband) << "\n";
  out << "# t_amb=" << io::exact(r.t_amb) << "\n";
  if (const auto& g = matrix.grid()) {
    out << "# grid_t_min=" << io::exact(g->t_min()) << "\n";
    out << "# grid_t_max=" << io::exact(g->t_max()) << "\n";
    out << "# grid_bins=" << g->bins_per_mode() << "\n";
  }
  out << "# dimension=" << matrix.size() << "\n";
  const Matrix& p = matrix.entries();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (j) out << ',';
      out << io::exact(p(i, j));
    }
    out << '\n';
  }
}

TransitionMatrix read_transition_matrix_csv(std::istream& in) {
  std::map<std::string, std::string> header;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      header[key] = line.substr(eq + 1);
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : io::split_csv(line)) {
      row.push_back(io::parse_double(cell, "transition matrix CSV"));
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw InvalidInput("transition matrix CSV has no rows");
  Matrix p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw InvalidInput("transition matrix CSV is not square");
    }
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const auto get = [&](const char* key, double fallback) {
    const auto it = header.find(key);
    return it == header.end() ? fallback : io::parse_double(it->second, key);
  };
  ThermalRegime regime;
  regime.dt = std::chrono::duration<double, std::ratio<60>>(get("dt_minutes", 1.0));
  regime.t_set = get("t_set", 0.0);
  regime.deadband = get("deadband", 0.0);
  regime.t_amb = get("t_amb", 0.0);
  std::optional<BinGrid> grid;
  if (header.count("grid_bins")) {
    grid.emplace(get("grid_t_min", 0.0), get("grid_t_max", 1.0),
                 static_cast<std::size_t>(get("grid_bins", 2.0)));
  }
  return TransitionMatrix(std::move(p), grid, regime);
}

}  // namespace tclflex
