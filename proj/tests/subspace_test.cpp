#include "shiftlab/scenarios.hpp"
#include "shiftlab/subspace.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace shiftlab {
namespace {

Matrix rotation(double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  Matrix r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

double orthonormality_error(const Matrix& c) {
  return (c.transpose() * c - Matrix::Identity(c.cols(), c.cols())).cwiseAbs().maxCoeff();
}

double one_nn_accuracy(const Matrix& train, const std::vector<int>& train_y, const Matrix& test,
                       const std::vector<int>& test_y) {
  int correct = 0;
  for (Eigen::Index j = 0; j < test.rows(); ++j) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      const double d = (train.row(i) - test.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (train_y[static_cast<std::size_t>(best)] == test_y[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows());
}

// Classes at (10, -2) and (10, 2) with unit covariance; the target is the
// same mixture rotated about the origin.
DomainSample rotated_scenario(std::uint64_t seed, std::size_t n, double degrees) {
  GaussianClassConditional c;
  c.classes[0] = {(Vector(2) << 10.0, -2.0).finished(), Matrix::Identity(2, 2)};
  c.classes[1] = {(Vector(2) << 10.0, 2.0).finished(), Matrix::Identity(2, 2)};
  const DomainSpec d{{0.5, 0.5}, c, std::nullopt};
  RandomStream rs(seed);
  DomainSample s{sample_domain(d, n, rs), sample_domain(d, n, rs)};
  s.target.features = s.target.features * rotation(degrees).transpose();
  return s;
}

TEST(Pca, LineThroughDiagonal) {
  Matrix x(5, 2);
  for (Eigen::Index i = 0; i < 5; ++i) x.row(i) << i - 2.0, i - 2.0;
  const auto p = pca(x, 1);
  EXPECT_NEAR(p.basis(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(p.basis(1, 0), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Pca, IsotropicDataUsesCoordinateOrder) {
  Matrix x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto p = pca(x, 2);
  EXPECT_NEAR(p.eigenvalues(0), p.eigenvalues(1), 1e-12);
  EXPECT_LE((p.basis - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, ThreePointsMatchDenseEigensolver) {
  Matrix x(3, 2);
  x << 0.0, 1.0, 2.0, 0.5, -1.0, 3.0;
  const auto p = pca(x, 2);
  const Vector mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - mean.transpose();
  const Matrix cov = c.transpose() * c / 2.0;
  Eigen::EigenSolver<Matrix> oracle(cov);
  const Vector values = oracle.eigenvalues().real();
  const Matrix vectors = oracle.eigenvectors().real();
  Eigen::Index top = values(0) > values(1) ? 0 : 1;
  EXPECT_NEAR(p.eigenvalues(0), values(top), 1e-10);
  EXPECT_NEAR(p.eigenvalues(1), values(1 - top), 1e-10);
  EXPECT_NEAR(std::abs(p.basis.col(0).dot(vectors.col(top).normalized())), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(p.basis.col(1).dot(vectors.col(1 - top).normalized())), 1.0, 1e-10);
}

TEST(Pca, SignConventionAndOrthonormality) {
  RandomStream rs(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = rs.normal_matrix(30, 4) * rs.normal_matrix(4, 4);
    const auto p = pca(x, 3);
    EXPECT_LE(orthonormality_error(p.basis), 1e-8);
    for (Eigen::Index k = 0; k < 3; ++k) {
      Eigen::Index arg;
      p.basis.col(k).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(p.basis(arg, k), 0.0);
    }
    for (Eigen::Index k = 1; k < 3; ++k) EXPECT_GE(p.eigenvalues(k - 1), p.eigenvalues(k));
  }
}

TEST(Pca, InvariantToSampleOrder) {
  RandomStream rs(2);
  const Matrix x = rs.normal_matrix(40, 3) * rs.normal_matrix(3, 3);
  const auto perm = rs.sample_without_replacement(40, 40);
  Matrix shuffled(40, 3);
  for (std::size_t i = 0; i < 40; ++i) shuffled.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
  const auto a = pca(x, 2), b = pca(shuffled, 2);
  EXPECT_LE((a.basis - b.basis).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, DimensionOutOfRange) {
  EXPECT_THROW(pca(Matrix::Random(3, 5), 3), Error);
  EXPECT_THROW(pca(Matrix::Random(10, 2), 0), Error);
  EXPECT_THROW(pca(Matrix::Random(10, 2), 3), Error);
}

TEST(VarianceDimension, KeepsRequestedFraction) {
  Matrix x(4, 3);
  x << 10, 0, 0, -10, 0, 0, 0, 1, 0, 0, -1, 0;
  EXPECT_EQ(variance_dimension(x, 0.95), 1);
  EXPECT_EQ(variance_dimension(x, 0.999), 2);
}

TEST(SubspaceAlign, IdenticalDomainsGiveIdentity) {
  RandomStream rs(3);
  const Matrix x = rs.normal_matrix(50, 3) * rs.normal_matrix(3, 3);
  const auto r = subspace_align(x, x, 2);
  EXPECT_LE((*r.projection.alignment - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SubspaceAlign, AlignmentIsContraction) {
  RandomStream rs(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = rs.normal_matrix(30, 4) * rs.normal_matrix(4, 4);
    const Matrix z = rs.normal_matrix(30, 4) * rs.normal_matrix(4, 4);
    const auto r = subspace_align(x, z, 2);
    Eigen::JacobiSVD<Matrix> svd(*r.projection.alignment);
    EXPECT_LE(svd.singularValues()(0), 1.0 + 1e-8);
    EXPECT_LE(orthonormality_error(*r.projection.target_basis), 1e-8);
  }
}

TEST(SubspaceAlign, RotatedScenarioImprovesNearestNeighbour) {
  for (std::uint64_t seed : {42u, 1u, 2u, 3u, 4u}) {
    const auto s = rotated_scenario(seed, 500, 30.0);
    const double before = one_nn_accuracy(s.source.features, s.source.y(), s.target.features, s.target.y());
    const auto r = subspace_align(s.source.features, s.target.features, 1);
    const double after = one_nn_accuracy(r.mapped_source, s.source.y(), r.mapped_target, s.target.y());
    EXPECT_GE(after - before, 0.10) << "seed " << seed << " before " << before << " after " << after;
  }
}

TEST(SubspaceAlign, EquivariantUnderSharedRotation) {
  RandomStream rs(5);
  const Matrix x = rs.normal_matrix(25, 2) * (Matrix(2, 2) << 3, 0, 0, 1).finished();
  const Matrix z = rs.normal_matrix(25, 2) * (Matrix(2, 2) << 1, 0.5, 0, 2).finished();
  const Matrix rot = rotation(47.0);
  const auto a = subspace_align(x, z, 2);
  const auto b = subspace_align(x * rot.transpose(), z * rot.transpose(), 2);
  auto distances = [](const Matrix& p, const Matrix& q) { return squared_distances(p, q); };
  EXPECT_LE((distances(a.mapped_source, a.mapped_target) - distances(b.mapped_source, b.mapped_target)).cwiseAbs().maxCoeff(),
            1e-8);
  EXPECT_LE((distances(a.mapped_source, a.mapped_source) - distances(b.mapped_source, b.mapped_source)).cwiseAbs().maxCoeff(),
            1e-8);
}

TEST(Tca, ConstraintSatisfied) {
  RandomStream rs(6);
  const Matrix x = rs.normal_matrix(30, 2);
  const Matrix z = rs.normal_matrix(25, 2).array() + 1.0;
  const auto r = tca(x, z, std::nullopt, 3);
  EXPECT_LE(r.constraint_residual, 1e-6);
  EXPECT_EQ(r.embedded_source.rows(), 30);
  EXPECT_EQ(r.embedded_target.cols(), 3);
}

TEST(Tca, IdenticalDomainsHaveNoEmbeddedDiscrepancy) {
  RandomStream rs(7);
  const Matrix x = rs.normal_matrix(20, 2);
  const auto r = tca(x, x, KernelSpec::gaussian(1.0), 2);
  const Vector gap = r.embedded_source.colwise().mean() - r.embedded_target.colwise().mean();
  EXPECT_LE(gap.squaredNorm(), 1e-8);
}

TEST(Tca, ToyInstanceMatchesDenseOracle) {
  RandomStream rs(8);
  const Matrix x = rs.normal_matrix(4, 2);
  const Matrix z = rs.normal_matrix(4, 2).array() + 0.7;
  const auto spec = KernelSpec::gaussian(1.2);
  const auto r = tca(x, z, spec, 2, 1.0);
  const auto t = tca_matrices(x, z, spec, 1.0);
  // Eigenvalues of A^{-1} B from a general (nonsymmetric) eigensolver.
  Eigen::EigenSolver<Matrix> oracle(t.objective.inverse() * t.constraint);
  std::vector<double> nu;
  for (Eigen::Index i = 0; i < oracle.eigenvalues().size(); ++i) nu.push_back(oracle.eigenvalues()(i).real());
  std::sort(nu.rbegin(), nu.rend());
  EXPECT_NEAR(r.objective, 1.0 / nu[0] + 1.0 / nu[1], 1e-8);
}

TEST(Tca, BeatsRandomFeasibleProjections) {
  RandomStream rs(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = rs.normal_matrix(15, 2);
    const Matrix z = rs.normal_matrix(12, 2).array() + 0.5 * trial;
    const auto spec = KernelSpec::gaussian(1.0);
    const auto r = tca(x, z, spec, 2, 1.0);
    const auto t = tca_matrices(x, z, spec, 1.0);
    for (int k = 0; k < 20; ++k) {
      const Matrix c0 = rs.normal_matrix(27, 2);
      Eigen::SelfAdjointEigenSolver<Matrix> es(c0.transpose() * t.constraint * c0);
      const Matrix c = c0 * es.operatorInverseSqrt();
      EXPECT_GE((c.transpose() * t.objective * c).trace(), r.objective - 1e-9);
    }
  }
}

TEST(Tca, InvalidArguments) {
  const Matrix x = Matrix::Random(5, 2);
  EXPECT_THROW(tca(x, x, std::nullopt, 10), Error);
  EXPECT_THROW(tca(x, x, std::nullopt, 1, 0.0), Error);
  EXPECT_THROW(tca(x, Matrix::Random(5, 3), std::nullopt, 1), Error);
}

}  // namespace
}  // namespace shiftlab
