// Minimax classifiers: robust bias-aware (RBA) classification and
// worst-case-weight ERM.
#pragma once

#include "shiftlab/classifiers.hpp"
#include "shiftlab/core.hpp"
#include "shiftlab/weights.hpp"

#include <optional>
#include <vector>

namespace shiftlab {

struct SaddleReport {
  double primal_objective = 0.0;
  double adversary_objective = 0.0;
  double gap = 0.0;  // |primal - adversary|
  int iterations = 0;
  bool converged = false;
};

// ---------------------------------------------------------------------------
// Robust bias-aware classification.
//
// The adversary picks target posteriors g(y|z_j) of maximal entropy whose
// feature-label moments, measured under the source distribution, match the
// labelled source sample:
//
//   (1/m) sum_j r(z_j) E_g[y | z_j] phi(z_j) = (1/n) sum_i y_i phi(x_i),
//   r = p_S / p_T.
//
// Against log loss the predictor's best response is h = g, and the solution
// has the form P(y | z) ~ exp(y r(z) theta.phi(z)). Where the source density
// vanishes r -> 0 and the prediction falls back to 1/2.
// ---------------------------------------------------------------------------

struct RbaOptions {
  int moment_order = 1;    // 1: phi = (1, x); 2: adds all products x_a x_b
  double gap_tolerance = 1e-3;
  double moment_tolerance = 1e-6;
  int budget = 500;
  double ratio_cap = 1e4;  // r is clipped to [0, ratio_cap]
};

struct RbaModel {
  int moment_order = 1;
  Vector feature_mean, feature_scale;  // standardization fitted on the source
  Vector source_mean, target_mean;
  Matrix source_cov, target_cov;
  double ratio_cap = 1e4;
  Vector theta;

  Matrix features(const Matrix& x) const;
  /// Estimated p_S(x) / p_T(x), clipped.
  Vector density_ratio(const Matrix& x) const;
  /// P(y = +1 | x).
  Vector posterior(const Matrix& x) const;
};

struct RbaResult {
  RbaModel model;
  Vector target_posterior;  // P(y = +1 | z_j)
  Vector moment_residual;   // adversary moments minus source moments
  SaddleReport report;
};

RbaResult rba_train(const Dataset& source, const Dataset& target, const RbaOptions& options = {});

// ---------------------------------------------------------------------------
// Worst-case-weight ERM: min_h max_w (1/n) sum loss_i(h) w_i + lambda |coef|^2
// over w >= 0, |mean(w) - 1| <= eps, w <= cap.
// ---------------------------------------------------------------------------

struct MinimaxOptions {
  double eps = 0.1;
  std::optional<double> cap;
  LossKind loss = LossKind::kLogistic;
  double lambda = 1e-3;
  double tolerance = 1e-6;
  int budget = 200;
};

struct MinimaxResult {
  LinearModel model;
  WeightVector worst_weights;
  SaddleReport report;
  std::vector<double> history;  // best worst-case objective after each outer iteration
};

/// Worst-case objective of a fixed model: the inner LP optimum plus penalty.
double worst_case_objective(const LinearModel& model, const Dataset& source, double eps, std::optional<double> cap);

MinimaxResult minimax_weight_train(const Dataset& source, const MinimaxOptions& options = {});

}  // namespace shiftlab
