// Subspace methods: PCA, subspace alignment, transfer component analysis.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/kernels.hpp"

#include <optional>

namespace shiftlab {

/// Linear map with optional alignment matrix. For PCA and subspace
/// alignment `basis` is D x d with orthonormal columns; for TCA it is the
/// (n+m) x d coefficient matrix applied to the joint kernel.
struct Projection {
  Matrix basis;
  Vector eigenvalues;
  std::optional<Matrix> alignment;       // W = C_S' C_T (subspace alignment only)
  std::optional<Matrix> target_basis;    // C_T (subspace alignment only)
  Vector source_mean, target_mean;       // centring records
};

/// Top-d principal directions of the centred covariance, eigenvalue
/// descending. Each component's largest-magnitude entry is positive;
/// degenerate eigenspaces use the basis obtained by orthonormalizing the
/// projected coordinate axes in ascending order.
Projection pca(const Matrix& x, int d);

/// Smallest d whose leading components retain `fraction` of the variance.
int variance_dimension(const Matrix& x, double fraction = 0.95);

struct AlignmentResult {
  Projection projection;
  Matrix mapped_source;  // (X - mean_S) C_S W
  Matrix mapped_target;  // (Z - mean_T) C_T
};

AlignmentResult subspace_align(const Matrix& source, const Matrix& target, int d);

struct TcaResult {
  Projection projection;  // basis = C ((n+m) x d)
  Matrix embedded_source;
  Matrix embedded_target;
  double objective = 0.0;            // trace(C' (K L K + mu I) C)
  double constraint_residual = 0.0;  // |C' K H K C - I|_max
};

struct TcaMatrices {
  Matrix objective;   // K L K + mu I
  Matrix constraint;  // K H K
  Matrix kernel;      // K
};

/// Joint kernel, MMD matrix L and centring matrix H assembled for TCA.
TcaMatrices tca_matrices(const Matrix& source, const Matrix& target, const KernelSpec& spec, double mu);

/// Minimizes trace(C'(KLK + mu I)C) subject to C'KHKC = I.
TcaResult tca(const Matrix& source, const Matrix& target, const std::optional<KernelSpec>& kernel, int d,
              double mu = 1.0);

}  // namespace shiftlab
