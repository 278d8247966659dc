#include "tclflex/lp.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "tclflex/errors.hpp"

namespace tclflex::lp {

namespace {

using Index = Eigen::Index;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RowKind { le, ge, eq };

// Original variable j = offset + sum(coef * standard column).
struct VariableMap {
  std::vector<std::pair<Index, double>> parts;
  double offset = 0.0;
};

enum class PhaseResult { optimal, unbounded, iteration_limit };

class Tableau {
 public:
  Tableau(RowMajor t, std::vector<Index> basis, const LpOptions& options, std::size_t cap)
      : t_(std::move(t)), basis_(std::move(basis)), options_(options), cap_(cap) {}

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  RowMajor& data() { return t_; }
  const std::vector<Index>& basis() const { return basis_; }
  std::size_t iterations() const { return iterations_; }

  // Objective row holds reduced costs d_j = c_B B^-1 a_j - c_j for a
  // maximisation; the current basis is optimal when all d_j >= -tol.
  void set_objective(const Vector& costs) {
    const Index m = rows();
    t_.row(m).setZero();
    t_.row(m).head(cols()) = -costs.transpose();
    for (Index i = 0; i < m; ++i) {
      const double cb = costs(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(m) += cb * t_.row(i);
    }
  }

  double objective() const { return t_(rows(), cols()); }

  PhaseResult run(const std::vector<bool>& barred) {
    const Index m = rows();
    const Index n = cols();
    const double tol = options_.tolerance;
    bool bland = options_.pricing == Pricing::bland;
    std::size_t degenerate_run = 0;
    while (true) {
      Index q = -1;
      double best = -tol;
      for (Index j = 0; j < n; ++j) {
        if (barred[static_cast<std::size_t>(j)]) continue;
        const double d = t_(m, j);
        if (d < best) {
          q = j;
          if (bland) break;
          best = d;
        }
      }
      if (q < 0) return PhaseResult::optimal;

      Index p = -1;
      double ratio = std::numeric_limits<double>::infinity();
      double pivot = 0.0;
      for (Index i = 0; i < m; ++i) {
        const double a = t_(i, q);
        if (a <= tol) continue;
        const double r = std::max(t_(i, n), 0.0) / a;
        const bool better = r < ratio - 1e-12;
        const bool tie = !better && r <= ratio + 1e-12;
        bool take = better;
        if (tie && p >= 0) {
          take = bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(p)]
                       : a > pivot;
        }
        if (take) {
          p = i;
          ratio = std::min(r, ratio);
          pivot = a;
        }
      }
      if (p < 0) return PhaseResult::unbounded;

      if (ratio <= 1e-13) {
        if (++degenerate_run >= options_.degenerate_run_before_bland) bland = true;
      } else {
        degenerate_run = 0;
      }
      pivot_on(p, q);
      if (++iterations_ > cap_) return PhaseResult::iteration_limit;
    }
  }

  void pivot_on(Index p, Index q) {
    t_.row(p) /= t_(p, q);
    const Eigen::RowVectorXd prow = t_.row(p);
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == p) continue;
      const double f = t_(i, q);
      if (f != 0.0) {
        t_.row(i) -= f * prow;
        t_(i, q) = 0.0;
      }
    }
    t_(p, q) = 1.0;
    basis_[static_cast<std::size_t>(p)] = q;
  }

 private:
  RowMajor t_;
  std::vector<Index> basis_;
  LpOptions options_;
  std::size_t cap_;
  std::size_t iterations_ = 0;
};

bool all_finite(const Matrix& m) { return m.allFinite(); }

double scale_of(const Eigen::Ref<const Eigen::RowVectorXd>& row, double rhs) {
  double s = std::max(1.0, std::abs(rhs));
  if (row.size() > 0) s = std::max(s, row.cwiseAbs().maxCoeff());
  return s;
}

}  // namespace

LinearProgram LinearProgram::nonnegative(Index n) {
  LinearProgram lp;
  lp.objective = Vector::Zero(n);
  lp.g = Matrix(0, n);
  lp.h = Vector(0);
  lp.e = Matrix(0, n);
  lp.f = Vector(0);
  lp.lower = Vector::Zero(n);
  lp.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
  return lp;
}

void LinearProgram::validate() const {
  const Index n = variables();
  if (g.cols() != n || e.cols() != n) throw InvalidInput("LP: constraint matrix width mismatch");
  if (g.rows() != h.size()) throw InvalidInput("LP: G and h row count mismatch");
  if (e.rows() != f.size()) throw InvalidInput("LP: E and f row count mismatch");
  if (lower.size() != n || upper.size() != n) throw InvalidInput("LP: bound size mismatch");
  if (!objective.allFinite() || !all_finite(g) || !h.allFinite() || !all_finite(e) ||
      !f.allFinite()) {
    throw InvalidInput("LP: non-finite coefficient");
  }
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j) ||
        lower(j) == std::numeric_limits<double>::infinity() ||
        upper(j) == -std::numeric_limits<double>::infinity()) {
      throw InvalidInput("LP: invalid bounds on variable " + std::to_string(j));
    }
  }
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

double max_violation(const LinearProgram& lp, const Vector& z) {
  double worst = 0.0;
  for (Index i = 0; i < lp.g.rows(); ++i) {
    const double v = lp.g.row(i).dot(z) - lp.h(i);
    worst = std::max(worst, v / scale_of(lp.g.row(i), lp.h(i)));
  }
  for (Index i = 0; i < lp.e.rows(); ++i) {
    const double v = std::abs(lp.e.row(i).dot(z) - lp.f(i));
    worst = std::max(worst, v / scale_of(lp.e.row(i), lp.f(i)));
  }
  for (Index j = 0; j < z.size(); ++j) {
    if (std::isfinite(lp.lower(j)))
      worst = std::max(worst, (lp.lower(j) - z(j)) / std::max(1.0, std::abs(lp.lower(j))));
    if (std::isfinite(lp.upper(j)))
      worst = std::max(worst, (z(j) - lp.upper(j)) / std::max(1.0, std::abs(lp.upper(j))));
  }
  return worst;
}

LpSolution solve(const LinearProgram& lp, const LpOptions& options) {
  lp.validate();
  const Index n = lp.variables();
  LpSolution out;

  // Shift and split variables so every standard column is >= 0.
  std::vector<VariableMap> maps(static_cast<std::size_t>(n));
  std::vector<std::pair<Index, double>> bound_rows;
  Index ns = 0;
  for (Index j = 0; j < n; ++j) {
    auto& map = maps[static_cast<std::size_t>(j)];
    const double lo = lp.lower(j);
    const double hi = lp.upper(j);
    if (std::isfinite(lo)) {
      map = {{{ns, 1.0}}, lo};
      if (std::isfinite(hi)) bound_rows.emplace_back(ns, hi - lo);
      ++ns;
    } else if (std::isfinite(hi)) {
      map = {{{ns, -1.0}}, hi};
      ++ns;
    } else {
      map = {{{ns, 1.0}, {ns + 1, -1.0}}, 0.0};
      ns += 2;
    }
  }

  const Index mg = lp.g.rows();
  const Index me = lp.e.rows();
  const Index m = mg + me + static_cast<Index>(bound_rows.size());

  Matrix a = Matrix::Zero(m, ns);
  Vector b(m);
  std::vector<RowKind> kind(static_cast<std::size_t>(m), RowKind::le);
  auto fill = [&](Index row, const Eigen::Ref<const Eigen::RowVectorXd>& coef, double rhs) {
    double shift = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double c = coef(j);
      if (c == 0.0) continue;
      const auto& map = maps[static_cast<std::size_t>(j)];
      for (const auto& [col, sign] : map.parts) a(row, col) += c * sign;
      shift += c * map.offset;
    }
    b(row) = rhs - shift;
  };
  for (Index i = 0; i < mg; ++i) fill(i, lp.g.row(i), lp.h(i));
  for (Index i = 0; i < me; ++i) {
    fill(mg + i, lp.e.row(i), lp.f(i));
    kind[static_cast<std::size_t>(mg + i)] = RowKind::eq;
  }
  for (std::size_t r = 0; r < bound_rows.size(); ++r) {
    const Index row = mg + me + static_cast<Index>(r);
    a(row, bound_rows[r].first) = 1.0;
    b(row) = bound_rows[r].second;
  }

  // Equilibrate rows and make every right-hand side nonnegative.
  Vector row_factor(m);
  for (Index i = 0; i < m; ++i) {
    double s = ns > 0 ? a.row(i).cwiseAbs().maxCoeff() : 0.0;
    if (s == 0.0) s = 1.0;
    double factor = 1.0 / s;
    if (b(i) * factor < 0.0) {
      factor = -factor;
      auto& k = kind[static_cast<std::size_t>(i)];
      if (k == RowKind::le) k = RowKind::ge;
    }
    a.row(i) *= factor;
    b(i) *= factor;
    row_factor(i) = factor;
  }

  Index n_slack = 0;
  Index n_art = 0;
  for (const auto k : kind) {
    if (k != RowKind::eq) ++n_slack;
    if (k != RowKind::le) ++n_art;
  }
  const Index ncols = ns + n_slack + n_art;
  const auto entries = static_cast<std::size_t>((m + 1) * (ncols + 1));
  if (entries > options.max_tableau_entries) {
    out.message = "tableau of " + std::to_string(entries) + " entries exceeds the memory guard";
    return out;
  }

  Matrix standard = Matrix::Zero(m, ncols);
  standard.leftCols(ns) = a;
  std::vector<Index> basis(static_cast<std::size_t>(m));
  {
    Index slack = ns;
    Index art = ns + n_slack;
    for (Index i = 0; i < m; ++i) {
      switch (kind[static_cast<std::size_t>(i)]) {
        case RowKind::le:
          standard(i, slack) = 1.0;
          basis[static_cast<std::size_t>(i)] = slack++;
          break;
        case RowKind::ge:
          standard(i, slack++) = -1.0;
          standard(i, art) = 1.0;
          basis[static_cast<std::size_t>(i)] = art++;
          break;
        case RowKind::eq:
          standard(i, art) = 1.0;
          basis[static_cast<std::size_t>(i)] = art++;
          break;
      }
    }
  }

  // Pivot on a slightly relaxed copy of b: a fixed pseudo-random increase of
  // each <= row breaks the heavy degeneracy of the reach-and-hold programs.
  // The exact basic solution is recovered from the final basis below.
  Vector b_pivot = b;
  {
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    for (Index i = 0; i < m; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      const double r = static_cast<double>(state >> 11) * 0x1.0p-53;
      if (kind[static_cast<std::size_t>(i)] == RowKind::le) {
        b_pivot(i) += options.perturbation * (1.0 + b(i)) * (0.5 + r);
      }
    }
  }

  RowMajor t = RowMajor::Zero(m + 1, ncols + 1);
  t.topLeftCorner(m, ncols) = standard;
  t.col(ncols).head(m) = b_pivot;

  std::size_t cap = options.max_iterations;
  if (cap == 0) cap = std::max<std::size_t>(10'000, 50 * static_cast<std::size_t>(m + ncols));
  Tableau tab(std::move(t), std::move(basis), options, cap);

  std::vector<bool> barred(static_cast<std::size_t>(ncols), false);
  const double bmax = m > 0 ? b.cwiseAbs().maxCoeff() : 0.0;

  if (n_art > 0) {
    Vector c1 = Vector::Zero(ncols);
    c1.tail(n_art).setConstant(-1.0);
    tab.set_objective(c1);
    const auto r = tab.run(barred);
    if (r == PhaseResult::iteration_limit) {
      out.iterations = tab.iterations();
      out.message = "iteration limit in phase 1";
      return out;
    }
    if (tab.objective() < -1e-8 * (1.0 + bmax)) {
      out.status = LpStatus::infeasible;
      out.iterations = tab.iterations();
      out.message = "phase 1 optimum " + std::to_string(tab.objective());
      return out;
    }
    // Pivot basic artificials out where a structural column allows it; the
    // rest sit on redundant rows at value zero.
    for (Index i = 0; i < m; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < ns + n_slack) continue;
      Index q = -1;
      double best = 1e-9;
      for (Index j = 0; j < ns + n_slack; ++j) {
        const double v = std::abs(tab.data()(i, j));
        if (v > best) {
          best = v;
          q = j;
        }
      }
      if (q >= 0) tab.pivot_on(i, q);
    }
    for (Index j = ns + n_slack; j < ncols; ++j) barred[static_cast<std::size_t>(j)] = true;
  }

  Vector c2 = Vector::Zero(ncols);
  for (Index j = 0; j < n; ++j) {
    for (const auto& [col, sign] : maps[static_cast<std::size_t>(j)].parts)
      c2(col) += lp.objective(j) * sign;
  }
  tab.set_objective(c2);
  const auto r2 = tab.run(barred);
  out.iterations = tab.iterations();
  if (r2 == PhaseResult::iteration_limit) {
    out.message = "iteration limit in phase 2";
    return out;
  }
  if (r2 == PhaseResult::unbounded) {
    out.status = LpStatus::unbounded;
    return out;
  }

  // Recover primal values from the tableau, then refine them (and obtain the
  // duals) from a fresh factorisation of the final basis.
  const auto& final_basis = tab.basis();
  Vector x = Vector::Zero(ncols);
  for (Index i = 0; i < m; ++i)
    x(final_basis[static_cast<std::size_t>(i)]) = std::max(0.0, tab.data()(i, ncols));
  Vector y = Vector::Zero(m);
  if (m > 0) {
    Matrix basis_matrix(m, m);
    Vector cb(m);
    for (Index i = 0; i < m; ++i) {
      basis_matrix.col(i) = standard.col(final_basis[static_cast<std::size_t>(i)]);
      cb(i) = c2(final_basis[static_cast<std::size_t>(i)]);
    }
    const Eigen::PartialPivLU<Matrix> lu(basis_matrix);
    const Vector xb = lu.solve(b);
    const Vector yb = lu.transpose().solve(cb);
    const double residual = (basis_matrix * xb - b).cwiseAbs().maxCoeff();
    if (xb.allFinite() && residual <= 1e-9 * (1.0 + bmax) && xb.minCoeff() > -1e-9) {
      x.setZero();
      for (Index i = 0; i < m; ++i)
        x(final_basis[static_cast<std::size_t>(i)]) = std::max(0.0, xb(i));
    }
    if (yb.allFinite()) y = yb;
  }

  out.z.resize(n);
  for (Index j = 0; j < n; ++j) {
    const auto& map = maps[static_cast<std::size_t>(j)];
    double v = map.offset;
    for (const auto& [col, sign] : map.parts) v += sign * x(col);
    out.z(j) = v;
  }
  out.objective_value = lp.objective.dot(out.z);
  out.inequality_duals = (y.head(mg).array() * row_factor.head(mg).array()).matrix();
  out.equality_duals = (y.segment(mg, me).array() * row_factor.segment(mg, me).array()).matrix();
  out.max_constraint_violation = max_violation(lp, out.z);
  if (out.max_constraint_violation > 1e-7) {
    out.message = "solution violates constraints by " + std::to_string(out.max_constraint_violation);
    return out;
  }
  out.status = LpStatus::optimal;
  return out;
}

void dump(std::ostream& out, const LinearProgram& lp) {
  const auto prev = out.precision(17);
  out << "variables " << lp.variables() << "\nobjective";
  for (Index j = 0; j < lp.variables(); ++j) out << ' ' << lp.objective(j);
  out << "\nbounds\n";
  for (Index j = 0; j < lp.variables(); ++j) out << lp.lower(j) << ' ' << lp.upper(j) << '\n';
  out << "le " << lp.g.rows() << '\n';
  for (Index i = 0; i < lp.g.rows(); ++i) {
    for (Index j = 0; j < lp.g.cols(); ++j) out << lp.g(i, j) << ' ';
    out << lp.h(i) << '\n';
  }
  out << "eq " << lp.e.rows() << '\n';
  for (Index i = 0; i < lp.e.rows(); ++i) {
    for (Index j = 0; j < lp.e.cols(); ++j) out << lp.e(i, j) << ' ';
    out << lp.f(i) << '\n';
  }
  out.precision(prev);
}

}  // namespace tclflex::lp
