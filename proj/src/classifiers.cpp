#include "shiftlab/classifiers.hpp"

#include <cmath>

namespace shiftlab {

namespace {

double log1p_exp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_training_inputs(const Dataset& data, const Vector& weights, LossKind loss, double lambda) {
  validate_or_throw(data, "training data");
  require(data.labeled(), "training data has no labels");
  require(weights.size() == static_cast<Eigen::Index>(data.rows()), "weight count does not match sample count",
          ErrorCode::kDimensionMismatch);
  require(weights.allFinite() && weights.minCoeff() >= 0.0, "weights must be finite and nonnegative");
  require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be nonnegative");
  require(loss != LossKind::kZeroOne, "zero-one loss cannot be trained directly");
}

Vector label_vector(const Dataset& data) {
  const auto& y = data.y();
  Vector out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out(static_cast<Eigen::Index>(i)) = y[i];
  return out;
}

/// Gradient of training_objective in (coef, intercept) layout.
Vector objective_gradient(const LinearModel& model, const Dataset& data, const Vector& weights) {
  const Vector s = model.scores(data.features);
  const auto& y = data.y();
  const double n = static_cast<double>(data.rows());
  Vector dscore(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    dscore(i) = weights(i) * loss_derivative(model.loss, s(i), y[static_cast<std::size_t>(i)]) / n;
  const auto d = data.features.cols();
  Vector g(d + 1);
  g.head(d) = data.features.transpose() * dscore + 2.0 * model.lambda * model.coef;
  g(d) = dscore.sum();
  return g;
}

LinearModel shifted(const LinearModel& m, const Vector& step) {
  LinearModel out = m;
  const auto d = m.coef.size();
  out.coef -= step.head(d);
  out.intercept -= step(d);
  return out;
}

TrainResult descend(const Dataset& data, const Vector& weights, LossKind loss, double lambda,
                    const TrainOptions& options) {
  TrainResult out;
  out.model = LinearModel::zeros(data.dim(), loss, lambda);
  out.objective = training_objective(out.model, data, weights);
  double step = 1.0;
  int it = 0;
  Vector g = objective_gradient(out.model, data, weights);
  out.gradient_norm = g.norm();
  for (; it < options.max_iterations && out.gradient_norm > options.gradient_tolerance; ++it) {
    const double g2 = g.squaredNorm();
    bool accepted = false;
    step = std::min(step * 2.0, 1e6);
    for (int halving = 0; halving < 80; ++halving) {
      LinearModel trial = shifted(out.model, step * g);
      const double f = training_objective(trial, data, weights);
      if (f <= out.objective - 1e-4 * step * g2) {
        out.model = std::move(trial);
        out.objective = f;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent along -g (kink of the hinge loss, or round-off)
    if (options.record_history) out.history.push_back(out.objective);
    g = objective_gradient(out.model, data, weights);
    out.gradient_norm = g.norm();
  }
  out.iterations = it;
  out.converged = out.gradient_norm <= options.gradient_tolerance;
  return out;
}

}  // namespace

LinearModel LinearModel::zeros(std::size_t dim, LossKind loss, double lambda) {
  LinearModel m;
  m.coef = Vector::Zero(static_cast<Eigen::Index>(dim));
  m.loss = loss;
  m.lambda = lambda;
  return m;
}

Vector LinearModel::scores(const Matrix& x) const {
  require(x.cols() == coef.size(), "model: feature dimension mismatch", ErrorCode::kDimensionMismatch);
  return (x * coef).array() + intercept;
}

double loss_value(LossKind kind, double score, int label) {
  require(std::isfinite(score), "loss: score must be finite");
  const double y = label > 0 ? 1.0 : -1.0;
  switch (kind) {
    case LossKind::kZeroOne: return ((score >= 0.0 ? 1.0 : -1.0) != y) ? 1.0 : 0.0;
    case LossKind::kQuadratic: return (score - y) * (score - y);
    case LossKind::kLogistic: return log1p_exp(-y * score);
    case LossKind::kHinge: return std::max(0.0, 1.0 - y * score);
  }
  return 0.0;
}

double loss_derivative(LossKind kind, double score, int label) {
  const double y = label > 0 ? 1.0 : -1.0;
  switch (kind) {
    case LossKind::kZeroOne: return 0.0;
    case LossKind::kQuadratic: return 2.0 * (score - y);
    case LossKind::kLogistic: return -y * sigmoid(-y * score);
    case LossKind::kHinge: return y * score < 1.0 ? -y : 0.0;
  }
  return 0.0;
}

double training_objective(const LinearModel& model, const Dataset& data, const Vector& weights) {
  const Vector s = model.scores(data.features);
  const auto& y = data.y();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += weights(i) * loss_value(model.loss, s(i), y[static_cast<std::size_t>(i)]);
  return acc / static_cast<double>(data.rows()) + model.lambda * model.coef.squaredNorm();
}

TrainResult train_weighted(const Dataset& source, const Vector& weights, LossKind loss, double lambda,
                           const TrainOptions& options) {
  check_training_inputs(source, weights, loss, lambda);
  if (loss != LossKind::kQuadratic) return descend(source, weights, loss, lambda, options);

  // Weighted ridge normal equations over the augmented design [X 1].
  const auto n = source.features.rows();
  const auto d = source.features.cols();
  Matrix a(n, d + 1);
  a.leftCols(d) = source.features;
  a.col(d).setOnes();
  const Vector y = label_vector(source);
  const Matrix aw = a.transpose() * weights.asDiagonal();
  Matrix lhs = aw * a / static_cast<double>(n);
  lhs.diagonal().head(d).array() += lambda;
  const Vector rhs = aw * y / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> es(lhs, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  require(es.eigenvalues().minCoeff() > 1e-12 * top, "weighted ridge: normal equations are singular",
          ErrorCode::kSingular);
  const Vector theta = lhs.ldlt().solve(rhs);

  TrainResult out;
  out.model = LinearModel::zeros(static_cast<std::size_t>(d), loss, lambda);
  out.model.coef = theta.head(d);
  out.model.intercept = theta(d);
  out.objective = training_objective(out.model, source, weights);
  out.gradient_norm = objective_gradient(out.model, source, weights).norm();
  out.converged = true;
  return out;
}

TrainResult train_weighted_descent(const Dataset& source, const Vector& weights, LossKind loss, double lambda,
                                   const TrainOptions& options) {
  check_training_inputs(source, weights, loss, lambda);
  return descend(source, weights, loss, lambda, options);
}

WeightVector class_weight_vector(const std::vector<int>& labels, const PriorPair& priors_source,
                                 const PriorPair& priors_target) {
  require(priors_source[0] > 0.0 && priors_source[1] > 0.0, "class weights: zero source prior");
  WeightVector w;
  w.estimator = "class";
  w.values.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == -1 || labels[i] == 1, "class weights: label outside {-1,+1}");
    const auto c = class_slot(labels[i]);
    w.values(static_cast<Eigen::Index>(i)) = priors_target[c] / priors_source[c];
  }
  return w;
}

Prediction predict(const LinearModel& model, const Matrix& x) {
  Prediction p;
  p.scores = model.scores(x);
  p.labels.resize(static_cast<std::size_t>(p.scores.size()));
  for (Eigen::Index i = 0; i < p.scores.size(); ++i) p.labels[static_cast<std::size_t>(i)] = p.scores(i) >= 0.0 ? 1 : -1;
  return p;
}

Vector sample_losses(const LinearModel& model, const Dataset& data, LossKind loss) {
  require(data.labeled(), "risk: dataset has no labels");
  const Vector s = model.scores(data.features);
  const auto& y = data.y();
  Vector out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) out(i) = loss_value(loss, s(i), y[static_cast<std::size_t>(i)]);
  return out;
}

double empirical_risk(const LinearModel& model, const Dataset& data, LossKind loss,
                      const std::optional<Vector>& weights) {
  const Vector l = sample_losses(model, data, loss);
  if (!weights) return l.mean();
  require(weights->size() == l.size(), "risk: weight count does not match sample count",
          ErrorCode::kDimensionMismatch);
  return l.dot(*weights) / static_cast<double>(l.size());
}

}  // namespace shiftlab
