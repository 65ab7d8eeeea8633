// Kernel evaluation and Gram matrices.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/random.hpp"

#include <optional>
#include <string>

namespace shiftlab {

enum class KernelFamily { kGaussian, kPolynomial, kLinear };

struct KernelSpec {
  KernelFamily family = KernelFamily::kGaussian;
  double bandwidth = 1.0;  // gaussian: exp(-|a-b|^2 / (2 bandwidth^2))
  int degree = 2;          // polynomial: (a.b + offset)^degree
  double offset = 1.0;

  static KernelSpec gaussian(double bandwidth) { return {KernelFamily::kGaussian, bandwidth, 2, 1.0}; }
  static KernelSpec polynomial(int degree, double offset) { return {KernelFamily::kPolynomial, 1.0, degree, offset}; }
  static KernelSpec linear() { return {KernelFamily::kLinear, 1.0, 1, 0.0}; }

  void check() const;
  std::string describe() const;
};

/// Entry (i, j) = kernel(a_i, b_j).
Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec);

/// Pairwise squared Euclidean distances between rows.
Matrix squared_distances(const Matrix& a, const Matrix& b);

inline constexpr std::size_t kMedianExactLimit = 5000;

/// Median of nonzero pairwise distances over the pooled rows of a and b.
/// Pools larger than kMedianExactLimit are subsampled with a fixed stream.
double median_heuristic(const Matrix& a, const Matrix& b);

/// Gaussian kernel with median-heuristic bandwidth, unless spec is given.
KernelSpec resolve_kernel(const std::optional<KernelSpec>& spec, const Matrix& a, const Matrix& b);

}  // namespace shiftlab
