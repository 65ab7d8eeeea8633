// Linear classifiers: losses, (importance-)weighted ERM, prediction, risk.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/weights.hpp"

#include <string>
#include <vector>

namespace shiftlab {

struct LinearModel {
  Vector coef;
  double intercept = 0.0;
  LossKind loss = LossKind::kLogistic;
  double lambda = 0.0;

  static LinearModel zeros(std::size_t dim, LossKind loss = LossKind::kLogistic, double lambda = 0.0);
  Vector scores(const Matrix& x) const;
};

/// zero-one: [sign(score) != label] with sign(0) = +1; quadratic: (score - label)^2;
/// hinge: max(0, 1 - label*score); logistic: log(1 + exp(-label*score)).
double loss_value(LossKind kind, double score, int label);

/// d loss / d score; a subgradient for hinge.
double loss_derivative(LossKind kind, double score, int label);

struct TrainOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  bool record_history = false;
};

struct TrainResult {
  LinearModel model;
  bool converged = true;
  double gradient_norm = 0.0;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> history;  // objective per accepted iterate, when recorded
};

/// Weighted training objective (1/n) sum w_i loss(score_i, y_i) + lambda |coef|^2.
double training_objective(const LinearModel& model, const Dataset& data, const Vector& weights);

/// Minimizes training_objective. Quadratic loss uses the weighted ridge normal
/// equations; logistic and hinge use full-batch descent with Armijo
/// backtracking (factor 0.5, slope 1e-4). The intercept is not penalized.
TrainResult train_weighted(const Dataset& source, const Vector& weights, LossKind loss, double lambda,
                           const TrainOptions& options = {});

inline TrainResult train_weighted(const Dataset& source, const WeightVector& weights, LossKind loss, double lambda,
                                  const TrainOptions& options = {}) {
  return train_weighted(source, weights.values, loss, lambda, options);
}

/// Same objective solved by gradient descent even for quadratic loss.
TrainResult train_weighted_descent(const Dataset& source, const Vector& weights, LossKind loss, double lambda,
                                   const TrainOptions& options = {});

/// weight_i = priors_target(y_i) / priors_source(y_i).
WeightVector class_weight_vector(const std::vector<int>& labels, const PriorPair& priors_source,
                                 const PriorPair& priors_target);

struct Prediction {
  std::vector<int> labels;
  Vector scores;
};

/// Labels are sign(score) with ties (score exactly 0) mapped to +1.
Prediction predict(const LinearModel& model, const Matrix& x);

/// (1/n) sum loss(score_i, y_i) w_i, unit weights when none are given.
double empirical_risk(const LinearModel& model, const Dataset& data, LossKind loss,
                      const std::optional<Vector>& weights = std::nullopt);

/// Per-sample losses of the model.
Vector sample_losses(const LinearModel& model, const Dataset& data, LossKind loss);

}  // namespace shiftlab
