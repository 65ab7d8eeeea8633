#include "shiftlab/optim.hpp"
#include "shiftlab/robust.hpp"
#include "shiftlab/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace shiftlab {
namespace {

GaussianClassConditional classes_1d(double neg, double pos) {
  GaussianClassConditional c;
  c.classes[0] = {Vector::Constant(1, neg), Matrix::Identity(1, 1)};
  c.classes[1] = {Vector::Constant(1, pos), Matrix::Identity(1, 1)};
  return c;
}

TEST(Rba, SharedDomainsGiveConfidentPosteriors) {
  RandomStream rs(1);
  const DomainSpec d{{0.5, 0.5}, classes_1d(-3.0, 3.0), std::nullopt};
  const Dataset source = sample_domain(d, 400, rs);
  const auto r = rba_train(source, source.unlabeled());
  Matrix means(2, 1);
  means << -3.0, 3.0;
  const Vector p = r.model.posterior(means);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_LT(std::abs(p(i) - std::round(p(i))), 0.2);
  EXPECT_LT(p(0), 0.5);
  EXPECT_GT(p(1), 0.5);
}

TEST(Rba, UniformPredictionsFarFromSource) {
  RandomStream rs(2);
  const DomainSpec d{{0.5, 0.5}, classes_1d(-1.0, 1.0), std::nullopt};
  const Dataset source = sample_domain(d, 300, rs);
  Matrix z(300, 1);
  for (Eigen::Index j = 0; j < 150; ++j) z(j, 0) = source.features(j, 0);
  for (Eigen::Index j = 150; j < 300; ++j) z(j, 0) = 10.0 + 2.0 * rs.uniform();
  const auto r = rba_train(source, Dataset(z));
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.moment_residual.cwiseAbs().maxCoeff(), 1e-3);
  // Source mass lies within about 4.5 of the origin; its sd is about 1.4.
  const double sd = std::sqrt((source.features.array() - source.features.mean()).square().mean());
  const double edge = source.features.cwiseAbs().maxCoeff();
  int checked = 0;
  for (Eigen::Index j = 0; j < 300; ++j) {
    if (z(j, 0) - edge >= 4.0 * sd) {
      EXPECT_LT(std::abs(r.target_posterior(j) - 0.5), 0.1);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Rba, FirstMomentMatchesSourceLabelMean) {
  RandomStream rs(3);
  const DomainSpec ds{{0.6, 0.4}, classes_1d(-1.0, 1.0), std::nullopt};
  const DomainSpec dt{{0.6, 0.4}, classes_1d(-0.5, 1.5), std::nullopt};
  const Dataset source = sample_domain(ds, 300, rs);
  const Dataset target = sample_domain(dt, 300, rs);
  const auto r = rba_train(source, target.unlabeled());
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(std::abs(r.moment_residual(0)), 1e-3);
  EXPECT_GE(r.report.gap, 0.0);
  EXPECT_LE(r.report.gap, 1e-3);
  RbaOptions second;
  second.moment_order = 2;
  const auto r2 = rba_train(source, target.unlabeled(), second);
  EXPECT_EQ(r2.moment_residual.size(), 3);
  EXPECT_LE(r2.moment_residual.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Rba, InvalidInputsRejected) {
  const Dataset unlabeled(Matrix::Random(5, 1));
  EXPECT_THROW(rba_train(unlabeled, unlabeled), Error);
  RbaOptions bad;
  bad.moment_order = 3;
  const Dataset labeled(Matrix::Random(4, 1), {1, -1, 1, -1});
  EXPECT_THROW(rba_train(labeled, unlabeled, bad), Error);
}

TEST(Minimax, EqualLossesMakeWeightsIrrelevant) {
  const Vector losses = Vector::Constant(5, 0.4);
  const auto r = optim::solve_mean_band_lp(losses, 0.0);
  EXPECT_NEAR(r.optimum, 0.4, 1e-15);
  const auto r2 = optim::solve_mean_band_lp(losses, 0.0, 1.0);
  EXPECT_NEAR(r2.optimum, 0.4, 1e-15);
}

TEST(Minimax, InnerProblemExample) {
  Vector l(3);
  l << 0.2, 0.5, 0.3;
  const auto r = optim::solve_mean_band_lp(l, 0.1);
  EXPECT_NEAR(r.optimum, 0.55, 1e-12);
  EXPECT_NEAR(r.weights(1), 3.3, 1e-12);
  EXPECT_EQ(r.weights(0), 0.0);
  EXPECT_EQ(r.weights(2), 0.0);
}

Dataset noisy_1d(RandomStream& rs, Eigen::Index n) {
  const DomainSpec d{{0.5, 0.5}, classes_1d(-1.0, 1.0), std::nullopt};
  return sample_domain(d, static_cast<std::size_t>(n), rs);
}

TEST(Minimax, NoWorseThanErmInTheWorstCase) {
  RandomStream rs(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset source = noisy_1d(rs, 200);
    MinimaxOptions opts;
    opts.eps = 0.2;
    opts.cap = 3.0;
    const auto r = minimax_weight_train(source, opts);
    const auto erm = train_weighted(source, Vector(Vector::Ones(200)), opts.loss, opts.lambda);
    EXPECT_LE(worst_case_objective(r.model, source, opts.eps, opts.cap),
              worst_case_objective(erm.model, source, opts.eps, opts.cap) + 1e-12);
    EXPECT_NEAR(r.report.primal_objective, worst_case_objective(r.model, source, opts.eps, opts.cap), 1e-12);
  }
}

TEST(Minimax, HistoryNonincreasingAndWeightsFeasible) {
  RandomStream rs(5);
  const Dataset source = noisy_1d(rs, 150);
  for (std::optional<double> cap : {std::optional<double>{}, std::optional<double>{2.5}}) {
    MinimaxOptions opts;
    opts.eps = 0.3;
    opts.cap = cap;
    const auto r = minimax_weight_train(source, opts);
    for (std::size_t i = 2; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    EXPECT_GE(r.worst_weights.values.minCoeff(), 0.0);
    EXPECT_LE(r.worst_weights.infeasibility(), 1e-6);
    EXPECT_GE(r.report.gap, 0.0);
    EXPECT_GE(r.report.primal_objective, r.report.adversary_objective - 1e-9);
  }
}

TEST(Minimax, ZeroEpsilonUncappedStillSolves) {
  RandomStream rs(6);
  const Dataset source = noisy_1d(rs, 60);
  MinimaxOptions opts;
  opts.eps = 0.0;
  const auto r = minimax_weight_train(source, opts);
  EXPECT_NEAR(r.worst_weights.values.mean(), 1.0, 1e-9);
  EXPECT_THROW(minimax_weight_train(source, MinimaxOptions{-0.1}), Error);
}

}  // namespace
}  // namespace shiftlab
