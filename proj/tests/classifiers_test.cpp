#include "shiftlab/classifiers.hpp"
#include "shiftlab/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace shiftlab {
namespace {

Dataset points_1d(std::initializer_list<double> xs, std::vector<int> ys) {
  Matrix x(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double v : xs) x(i++, 0) = v;
  return Dataset(x, std::move(ys));
}

Dataset random_labeled(RandomStream& rs, Eigen::Index n, Eigen::Index dim) {
  Matrix x = rs.normal_matrix(n, dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (x.row(i).sum() + rs.normal() > 0) ? 1 : -1;
  return Dataset(x, y);
}

TEST(Loss, Examples) {
  EXPECT_EQ(loss_value(LossKind::kZeroOne, 2.0, 1), 0.0);
  EXPECT_EQ(loss_value(LossKind::kZeroOne, 0.0, -1), 1.0);
  EXPECT_EQ(loss_value(LossKind::kHinge, 0.0, 1), 1.0);
  EXPECT_EQ(loss_value(LossKind::kQuadratic, 1.0, -1), 4.0);
  EXPECT_NEAR(loss_value(LossKind::kLogistic, 0.0, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss_value(LossKind::kLogistic, -800.0, 1), 800.0, 1e-9);
  EXPECT_NEAR(loss_value(LossKind::kLogistic, 800.0, 1), 0.0, 1e-300);
}

TEST(Loss, DerivativesMatchFiniteDifferences) {
  for (auto kind : {LossKind::kQuadratic, LossKind::kLogistic, LossKind::kHinge}) {
    for (double s : {-2.3, -0.4, 0.3, 1.7}) {
      for (int y : {-1, 1}) {
        const double h = 1e-6;
        const double fd = (loss_value(kind, s + h, y) - loss_value(kind, s - h, y)) / (2 * h);
        EXPECT_NEAR(loss_derivative(kind, s, y), fd, 1e-6) << to_string(kind) << " " << s << " " << y;
      }
    }
  }
}

TEST(Train, QuadraticClosedFormExample) {
  const auto r = train_weighted(points_1d({-1.0, 1.0}, {-1, 1}), Vector::Ones(2), LossKind::kQuadratic, 0.0);
  EXPECT_NEAR(r.model.coef(0), 1.0, 1e-12);
  EXPECT_NEAR(r.model.intercept, 0.0, 1e-12);
}

TEST(Train, HeavyPenaltyShrinksCoefficients) {
  RandomStream rs(1);
  const auto d = random_labeled(rs, 50, 3);
  for (auto kind : {LossKind::kQuadratic, LossKind::kLogistic, LossKind::kHinge}) {
    const auto r = train_weighted(d, Vector::Ones(50), kind, 1e6);
    EXPECT_LT(r.model.coef.norm(), 1e-3) << to_string(kind);
  }
}

TEST(Train, DoubledWeightsKeepQuadraticArgmin) {
  RandomStream rs(2);
  const auto d = random_labeled(rs, 30, 2);
  Vector w(30);
  for (Eigen::Index i = 0; i < 30; ++i) w(i) = 0.2 + rs.uniform();
  const auto a = train_weighted(d, w, LossKind::kQuadratic, 0.0);
  const auto b = train_weighted(d, Vector(2.0 * w), LossKind::kQuadratic, 0.0);
  EXPECT_LE((a.model.coef - b.model.coef).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(a.model.intercept, b.model.intercept, 1e-10);
}

TEST(Train, SingularNormalEquationsRejected) {
  Matrix x = Matrix::Ones(4, 2);
  EXPECT_THROW(train_weighted(Dataset(x, {1, -1, 1, -1}), Vector::Ones(4), LossKind::kQuadratic, 0.0), Error);
}

TEST(Train, ZeroOneLossAndBadWeightsRejected) {
  const auto d = points_1d({-1.0, 1.0}, {-1, 1});
  EXPECT_THROW(train_weighted(d, Vector::Ones(2), LossKind::kZeroOne, 0.0), Error);
  EXPECT_THROW(train_weighted(d, Vector::Ones(3), LossKind::kLogistic, 0.0), Error);
  EXPECT_THROW(train_weighted(d, Vector::Ones(2), LossKind::kLogistic, -1.0), Error);
  EXPECT_THROW(train_weighted(Dataset(Matrix::Ones(2, 1)), Vector::Ones(2), LossKind::kLogistic, 0.0), Error);
}

TEST(Train, ClosedFormMatchesDescent) {
  RandomStream rs(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = random_labeled(rs, 25, 2);
    Vector w(25);
    for (Eigen::Index i = 0; i < 25; ++i) w(i) = 0.1 + 2.0 * rs.uniform();
    const double lambda = trial % 2 ? 0.0 : 0.05;
    TrainOptions opts;
    opts.gradient_tolerance = 1e-9;
    opts.max_iterations = 200000;
    const auto exact = train_weighted(d, w, LossKind::kQuadratic, lambda);
    const auto descent = train_weighted_descent(d, w, LossKind::kQuadratic, lambda, opts);
    EXPECT_LE((exact.model.coef - descent.model.coef).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(exact.model.intercept, descent.model.intercept, 1e-4);
  }
}

TEST(Train, ObjectiveNonincreasing) {
  RandomStream rs(4);
  for (auto kind : {LossKind::kLogistic, LossKind::kHinge}) {
    const auto d = random_labeled(rs, 80, 3);
    TrainOptions opts;
    opts.record_history = true;
    const auto r = train_weighted(d, Vector::Ones(80), kind, 1e-2, opts);
    ASSERT_FALSE(r.history.empty());
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    EXPECT_NEAR(r.objective, training_objective(r.model, d, Vector::Ones(80)), 1e-12);
  }
}

TEST(Train, LogisticReachesGradientTolerance) {
  RandomStream rs(5);
  const auto d = random_labeled(rs, 100, 2);
  const auto r = train_weighted(d, Vector::Ones(100), LossKind::kLogistic, 1e-3);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.gradient_norm, 1e-6);
}

TEST(ClassWeights, Examples) {
  const auto w = class_weight_vector({1, -1, 1}, {0.5, 0.5}, {0.25, 0.75});
  EXPECT_DOUBLE_EQ(w.values(0), 1.5);
  EXPECT_DOUBLE_EQ(w.values(1), 0.5);
  const auto eq = class_weight_vector({1, -1, -1}, {0.3, 0.7}, {0.3, 0.7});
  EXPECT_EQ(eq.values, Vector::Ones(3));
  EXPECT_THROW(class_weight_vector({1}, {1.0, 0.0}, {0.5, 0.5}), Error);
}

TEST(ClassWeights, MeanTendsToOne) {
  RandomStream rs(6);
  std::vector<int> labels;
  for (int i = 0; i < 20000; ++i) labels.push_back(rs.bernoulli(0.3) ? 1 : -1);
  const auto w = class_weight_vector(labels, {0.7, 0.3}, {0.4, 0.6});
  EXPECT_NEAR(w.values.mean(), 1.0, 0.03);
}

TEST(Predict, Examples) {
  const auto zero = LinearModel::zeros(2);
  const auto p = predict(zero, Matrix::Random(4, 2));
  for (int y : p.labels) EXPECT_EQ(y, 1);
  EXPECT_EQ(p.scores, Vector::Zero(4));
  LinearModel m = LinearModel::zeros(2);
  m.coef << 1.0, 0.0;
  Matrix x(1, 2);
  x << 3.0, -9.0;
  const auto q = predict(m, x);
  EXPECT_DOUBLE_EQ(q.scores(0), 3.0);
  EXPECT_EQ(q.labels[0], 1);
  EXPECT_THROW(predict(m, Matrix::Zero(1, 3)), Error);
}

TEST(Predict, SeparableTrainingErrorZero) {
  const auto d = points_1d({-1.0, 1.0}, {-1, 1});
  for (auto kind : {LossKind::kLogistic, LossKind::kHinge, LossKind::kQuadratic}) {
    const auto r = train_weighted(d, Vector::Ones(2), kind, 0.0);
    EXPECT_EQ(empirical_risk(r.model, d, LossKind::kZeroOne), 0.0) << to_string(kind);
  }
}

TEST(EmpiricalRisk, Examples) {
  const auto d = points_1d({1.0, 2.0, 3.0}, {1, 1, 1});
  LinearModel right = LinearModel::zeros(1);
  right.coef(0) = 1.0;
  LinearModel wrong = right;
  wrong.coef(0) = -1.0;
  EXPECT_EQ(empirical_risk(right, d, LossKind::kZeroOne), 0.0);
  EXPECT_EQ(empirical_risk(wrong, d, LossKind::kZeroOne), 1.0);
  // Losses (0, 1, 1) with weights (2, 1, 1).
  LinearModel mixed = LinearModel::zeros(1);
  mixed.coef(0) = -1.0;
  mixed.intercept = 1.5;
  EXPECT_NEAR(empirical_risk(mixed, d, LossKind::kZeroOne, Vector((Vector(3) << 2, 1, 1).finished())), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(empirical_risk(right, Dataset(Matrix::Ones(2, 1)), LossKind::kZeroOne), Error);
}

TEST(ImportanceWeighting, UnbiasedUnderCovariateShift) {
  const auto scenario = make_covariate_shift_1d(1.25);
  LinearModel model = LinearModel::zeros(1);
  model.coef(0) = 1.0;
  model.intercept = -0.5;
  const double target_risk = linear_rule_risk(scenario.target, model.coef, model.intercept);
  double acc = 0.0;
  for (int t = 0; t < 100; ++t) {
    RandomStream rs(77, static_cast<std::uint64_t>(t));
    const auto s = sample_scenario(scenario, 2000, 2000, rs);
    const Vector w = true_importance_weights(scenario, s.source.features);
    acc += empirical_risk(model, s.source, LossKind::kZeroOne, w);
  }
  EXPECT_NEAR(acc / 100.0, target_risk, 0.02);
}

TEST(ImportanceWeighting, ClassWeightsCorrectPriorShift) {
  GaussianClassConditional c;
  c.classes[0] = {Vector::Constant(1, -1.0), Matrix::Identity(1, 1)};
  c.classes[1] = {Vector::Constant(1, 1.0), Matrix::Identity(1, 1)};
  const auto scenario = make_prior_shift({0.5, 0.5}, {0.75, 0.25}, c);
  LinearModel model = LinearModel::zeros(1);
  model.coef(0) = 1.0;
  const double target_risk = linear_rule_risk(scenario.target, model.coef, model.intercept);
  double acc = 0.0;
  for (int t = 0; t < 100; ++t) {
    RandomStream rs(78, static_cast<std::uint64_t>(t));
    const auto s = sample_scenario(scenario, 2000, 2000, rs);
    const auto w = class_weight_vector(s.source.y(), scenario.source.priors, scenario.target.priors);
    acc += empirical_risk(model, s.source, LossKind::kZeroOne, w.values);
  }
  EXPECT_NEAR(acc / 100.0, target_risk, 0.02);
}

}  // namespace
}  // namespace shiftlab
