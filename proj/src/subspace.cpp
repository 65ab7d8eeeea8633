#include "shiftlab/subspace.hpp"

#include <cmath>
#include <sstream>

namespace shiftlab {

namespace {

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best + 1e-12) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v(arg) < 0.0) v = -v;
}

/// Replaces the columns of `group` with the canonical basis of their span.
Matrix canonical_basis(const Matrix& group) {
  const auto dim = group.rows();
  const auto k = group.cols();
  Matrix out(dim, k);
  Eigen::Index filled = 0;
  for (Eigen::Index axis = 0; axis < dim && filled < k; ++axis) {
    Vector v = group * group.row(axis).transpose();  // projection of e_axis onto the span
    for (Eigen::Index c = 0; c < filled; ++c) v -= out.col(c).dot(v) * out.col(c);
    const double norm = v.norm();
    if (norm > 1e-8) out.col(filled++) = v / norm;
  }
  return out;
}

Vector column_mean(const Matrix& x) { return x.colwise().mean().transpose(); }

}  // namespace

Projection pca(const Matrix& x, int d) {
  const auto n = x.rows();
  const auto dim = x.cols();
  if (!(d >= 1 && d <= std::min<Eigen::Index>(n - 1, dim))) {
    std::ostringstream os;
    os << "pca: d=" << d << " outside [1, min(n-1, D)] = [1, " << std::min<Eigen::Index>(n - 1, dim) << "]";
    throw Error(ErrorCode::kInvalidArgument, os.str());
  }
  Projection p;
  p.source_mean = column_mean(x);
  const Matrix centred = x.rowwise() - p.source_mean.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  require(es.info() == Eigen::Success, "pca: eigendecomposition failed", ErrorCode::kNotConverged);

  // Descending order.
  const Vector values = es.eigenvalues().reverse();
  Matrix vectors = es.eigenvectors().rowwise().reverse();
  const double tol = 1e-10 * std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index start = 0; start < dim;) {
    Eigen::Index end = start + 1;
    while (end < dim && std::abs(values(end) - values(start)) <= tol) ++end;
    if (end - start > 1) vectors.middleCols(start, end - start) = canonical_basis(vectors.middleCols(start, end - start));
    start = end;
  }
  for (Eigen::Index c = 0; c < dim; ++c) fix_sign(vectors.col(c));

  p.basis = vectors.leftCols(d);
  p.eigenvalues = values.head(d);
  return p;
}

int variance_dimension(const Matrix& x, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "variance_dimension: fraction outside (0, 1]");
  require(x.rows() >= 2, "variance_dimension: need at least two samples");
  const Matrix centred = x.rowwise() - column_mean(x).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(centred.transpose() * centred, Eigen::EigenvaluesOnly);
  const Vector values = es.eigenvalues().reverse().cwiseMax(0.0);
  const double total = values.sum();
  const int cap = static_cast<int>(std::min<Eigen::Index>(x.rows() - 1, x.cols()));
  if (total <= 0.0) return 1;
  double acc = 0.0;
  for (int k = 0; k < cap; ++k) {
    acc += values(k);
    if (acc >= fraction * total) return k + 1;
  }
  return cap;
}

AlignmentResult subspace_align(const Matrix& source, const Matrix& target, int d) {
  require(source.cols() == target.cols(), "subspace_align: dimension mismatch", ErrorCode::kDimensionMismatch);
  const Projection ps = pca(source, d);
  const Projection pt = pca(target, d);

  AlignmentResult out;
  out.projection.basis = ps.basis;
  out.projection.eigenvalues = ps.eigenvalues;
  out.projection.target_basis = pt.basis;
  out.projection.alignment = ps.basis.transpose() * pt.basis;
  out.projection.source_mean = ps.source_mean;
  out.projection.target_mean = pt.source_mean;
  out.mapped_source = (source.rowwise() - ps.source_mean.transpose()) * ps.basis * *out.projection.alignment;
  out.mapped_target = (target.rowwise() - pt.source_mean.transpose()) * pt.basis;
  return out;
}

TcaMatrices tca_matrices(const Matrix& source, const Matrix& target, const KernelSpec& spec, double mu) {
  require(source.cols() == target.cols(), "tca: dimension mismatch", ErrorCode::kDimensionMismatch);
  const auto n = source.rows();
  const auto m = target.rows();
  const auto total = n + m;
  const Matrix pooled = vstack(source, target);
  TcaMatrices t;
  t.kernel = gram(pooled, pooled, spec);

  Vector e(total);
  e.head(n).setConstant(1.0 / static_cast<double>(n));
  e.tail(m).setConstant(-1.0 / static_cast<double>(m));
  // L = e e' has entries 1/n^2, 1/m^2 and -1/(nm) by block.
  const Vector ke = t.kernel * e;
  t.objective = ke * ke.transpose();
  t.objective.diagonal().array() += mu;

  const Matrix kc = t.kernel.rowwise() - t.kernel.colwise().mean();  // H K
  t.constraint = kc.transpose() * kc;                                // K H H K = K H K
  t.constraint = 0.5 * (t.constraint + t.constraint.transpose());
  t.objective = 0.5 * (t.objective + t.objective.transpose());
  return t;
}

TcaResult tca(const Matrix& source, const Matrix& target, const std::optional<KernelSpec>& kernel, int d, double mu) {
  require(mu > 0.0 && std::isfinite(mu), "tca: mu must be positive");
  require(source.rows() >= 1 && target.rows() >= 1, "tca: empty domain");
  const auto total = source.rows() + target.rows();
  require(d >= 1 && d <= total - 1, "tca: d must lie in [1, n+m-1]");
  const KernelSpec spec = resolve_kernel(kernel, source, target);
  const TcaMatrices t = tca_matrices(source, target, spec, mu);

  // B c = nu A c with A = KLK + mu I positive definite; the d largest nu give
  // the d smallest generalized Rayleigh quotients c'Ac / c'Bc = 1 / nu.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(t.constraint, t.objective);
  require(ges.info() == Eigen::Success, "tca: generalized eigensolver failed", ErrorCode::kNotConverged);
  const Vector nu = ges.eigenvalues();
  const double floor = 1e-12 * std::max(nu.maxCoeff(), 1e-300);
  require(nu(total - d) > floor, "tca: constraint matrix rank is below d", ErrorCode::kSingular);

  Matrix c(total, d);
  Vector values(d);
  for (int k = 0; k < d; ++k) {
    const auto idx = total - 1 - k;
    c.col(k) = ges.eigenvectors().col(idx) / std::sqrt(nu(idx));
    values(k) = 1.0 / nu(idx);
  }
  // Polish C'BC = I against round-off: C <- C (C'BC)^{-1/2}.
  const Matrix gramc = c.transpose() * t.constraint * c;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (gramc + gramc.transpose()));
  c = c * es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  for (int k = 0; k < d; ++k) fix_sign(c.col(k));

  TcaResult out;
  out.projection.basis = c;
  out.projection.eigenvalues = values;
  out.projection.source_mean = column_mean(source);
  out.projection.target_mean = column_mean(target);
  const Matrix embedded = t.kernel * c;
  out.embedded_source = embedded.topRows(source.rows());
  out.embedded_target = embedded.bottomRows(target.rows());
  out.objective = (c.transpose() * t.objective * c).trace();
  out.constraint_residual = (c.transpose() * t.constraint * c - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace shiftlab
