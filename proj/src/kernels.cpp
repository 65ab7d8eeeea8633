#include "shiftlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shiftlab {

void KernelSpec::check() const {
  switch (family) {
    case KernelFamily::kGaussian:
      require(bandwidth > 0.0 && std::isfinite(bandwidth), "kernel: gaussian bandwidth must be positive");
      break;
    case KernelFamily::kPolynomial:
      require(degree >= 1, "kernel: polynomial degree must be at least 1");
      require(std::isfinite(offset), "kernel: polynomial offset must be finite");
      break;
    case KernelFamily::kLinear: break;
  }
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (family) {
    case KernelFamily::kGaussian: os << "gaussian(sigma=" << bandwidth << ")"; break;
    case KernelFamily::kPolynomial: os << "polynomial(degree=" << degree << ",offset=" << offset << ")"; break;
    case KernelFamily::kLinear: os << "linear"; break;
  }
  return os.str();
}

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "squared_distances: column count mismatch", ErrorCode::kDimensionMismatch);
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return d;
}

Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  spec.check();
  require(a.cols() == b.cols(), "gram: column count mismatch", ErrorCode::kDimensionMismatch);
  switch (spec.family) {
    case KernelFamily::kGaussian: {
      const double scale = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
      return (squared_distances(a, b).array() * scale).exp().matrix();
    }
    case KernelFamily::kPolynomial: {
      Matrix inner = a * b.transpose();
      return (inner.array() + spec.offset).pow(spec.degree).matrix();
    }
    case KernelFamily::kLinear: return a * b.transpose();
  }
  return {};
}

double median_heuristic(const Matrix& a, const Matrix& b) {
  Matrix pooled = vstack(a, b);
  require(pooled.rows() >= 2, "median_heuristic: need at least two points");
  if (static_cast<std::size_t>(pooled.rows()) > kMedianExactLimit) {
    RandomStream stream(0x6d656469616eULL);
    auto keep = stream.sample_without_replacement(static_cast<std::size_t>(pooled.rows()), kMedianExactLimit);
    std::sort(keep.begin(), keep.end());
    Matrix sub(static_cast<Eigen::Index>(keep.size()), pooled.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = pooled.row(static_cast<Eigen::Index>(keep[i]));
    pooled = std::move(sub);
  }
  std::vector<double> dist;
  const Eigen::Index n = pooled.rows();
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (pooled.row(i) - pooled.row(j)).norm();
      if (d > 0.0) dist.push_back(d);
    }
  require(!dist.empty(), "median_heuristic: all pairwise distances are zero");
  // Lower median keeps the result an actual observed distance.
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid;
}

KernelSpec resolve_kernel(const std::optional<KernelSpec>& spec, const Matrix& a, const Matrix& b) {
  if (spec) {
    spec->check();
    return *spec;
  }
  return KernelSpec::gaussian(median_heuristic(a, b));
}

}  // namespace shiftlab
