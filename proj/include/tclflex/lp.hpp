#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

namespace tclflex::lp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// maximize objective' z  s.t.  G z <= h,  E z == f,  lower <= z <= upper.
// Bounds may be +-infinity.
struct LinearProgram {
  Vector objective;
  Matrix g;
  Vector h;
  Matrix e;
  Vector f;
  Vector lower;
  Vector upper;

  // n variables in [0, +inf), no constraints.
  static LinearProgram nonnegative(Eigen::Index n);

  Eigen::Index variables() const { return objective.size(); }
  // Throws InvalidInput on inconsistent dimensions or NaN data.
  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::numerical_failure;
  Vector z;
  double objective_value = 0.0;
  // Largest violation of any constraint or bound, each scaled by
  // max(1, |row|_inf, |rhs|), recomputed from the raw data.
  double max_constraint_violation = 0.0;
  // Multipliers of G z <= h (nonnegative) and E z == f at an optimum.
  Vector inequality_duals;
  Vector equality_duals;
  std::size_t iterations = 0;
  std::string message;
};

enum class Pricing {
  // Largest reduced cost; switches to Bland's rule for the remainder of the
  // phase after a run of degenerate pivots.
  dantzig_then_bland,
  bland,
};

struct LpOptions {
  Pricing pricing = Pricing::dantzig_then_bland;
  double tolerance = 1e-9;
  // Relative right-hand-side relaxation of <= rows used while pivoting.
  double perturbation = 1e-8;
  std::size_t degenerate_run_before_bland = 50;
  std::size_t max_iterations = 0;  // 0: 50 * (rows + columns), at least 10000
  std::size_t max_tableau_entries = 150'000'000;
};

// Dense two-phase simplex. Single-threaded and reentrant.
LpSolution solve(const LinearProgram& lp, const LpOptions& options = {});

// Scaled worst violation of z against the raw constraint data.
double max_violation(const LinearProgram& lp, const Vector& z);

// Plain-text fixed format for offline cross-checking.
void dump(std::ostream& out, const LinearProgram& lp);

}  // namespace tclflex::lp
