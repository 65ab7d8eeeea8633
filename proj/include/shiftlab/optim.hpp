// Small deterministic solvers for the two feasible-set shapes used by the
// weight estimators and the worst-case-weight classifier:
//
//   box:        lower <= x <= upper
//   mean band:  |mean(x) - 1| <= eps
//
// solve_qp handles min 1/2 x'Px + q'x over box (and optionally mean band) by
// monotone accelerated projected gradient. solve_mean_band_lp is the exact
// greedy maximizer of a linear objective over the same set.
#pragma once

#include "shiftlab/core.hpp"

#include <limits>
#include <optional>

namespace shiftlab::optim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
  Matrix P;  // symmetrized on construction
  Vector q;
  Vector lower;
  Vector upper;
  std::optional<double> mean_deviation;  // eps of the mean band, centred on 1

  QpProblem(Matrix p, Vector q, Vector lower, Vector upper, std::optional<double> eps = std::nullopt);

  Eigen::Index size() const { return q.size(); }
  double objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
  Vector gradient(const Vector& x) const { return P * x + q; }
  /// Throws if the feasible set is empty.
  void check_feasible() const;
  /// Euclidean projection onto the feasible set.
  Vector project(const Vector& y) const;
  /// Max violation of bounds and mean band (0 when feasible).
  double infeasibility(const Vector& x) const;
};

struct QpOptions {
  double tolerance = 1e-6;
  int budget = 50000;
  std::optional<Vector> start;  // projected before use
  bool record_history = false;
};

struct QpResult {
  Vector x;
  double objective = 0.0;
  double kkt_residual = 0.0;  // |x - P(x - grad f(x))|_inf
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective per iteration, when recorded
};

QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// Exact minimizer of 1/2 x'Hx - g'x over x >= 0 by a primal active-set
/// method (small dense problems). Optimality: no fixed coordinate has a
/// descent direction larger than tolerance * max(|H|, |g|).
QpResult solve_nonnegative_qp(const Matrix& h, const Vector& g, const QpOptions& options = {});

/// Projection of y onto {lower <= x <= upper, sum_lo <= sum(x) <= sum_hi}.
Vector project_box_sum(const Vector& y, const Vector& lower, const Vector& upper, double sum_lo, double sum_hi);

struct LpResult {
  Vector weights;
  double optimum = 0.0;     // (1/n) sum losses_i w_i
  bool mass_short = false;  // cap too small to place n(1 - eps)
};

/// Exact maximizer of (1/n) sum l_i w_i over {w >= 0, |mean(w) - 1| <= eps, w <= cap}.
LpResult solve_mean_band_lp(const Vector& losses, double eps, std::optional<double> cap = std::nullopt);

struct KliepOptions {
  double tolerance = 1e-6;  // on the duality gap
  int budget = 10000;
};

struct KliepResult {
  Vector alpha;
  double objective = 0.0;  // mean log w(z_j)
  double kkt_residual = 0.0;  // Frank-Wolfe duality gap
  int iterations = 0;
  bool converged = false;
};

/// Maximizes mean_j log (A alpha)_j subject to b'alpha = 1, alpha >= 0.
/// A holds basis values at target points (m x b), b holds the source means of
/// the basis functions. Active-set Newton on the faces of the constraint
/// set, entering the coordinate with the largest Frank-Wolfe gap.

KliepResult solve_kliep(const Matrix& target_basis, const Vector& source_basis_mean, const KliepOptions& options = {});

}  // namespace shiftlab::optim
