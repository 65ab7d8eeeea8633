// Domain discrepancy measures.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/kernels.hpp"
#include "shiftlab/random.hpp"
#include "shiftlab/scenarios.hpp"
#include "shiftlab/weights.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace shiftlab {

struct DiscrepancyReport {
  std::string measure;
  double value = 0.0;
  bool clamped = false;  // small negative estimate set to zero
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const;
};

enum class MmdEstimator { kBiased, kUnbiased };

/// Squared MMD between (optionally weighted) rows of x and rows of z. The
/// biased V-statistic is
///   (1/n^2) sum w_i k(x_i,x_i') w_i' - (2/nm) sum w_i k(x_i,z_j) + (1/m^2) sum k(z_j,z_j').
DiscrepancyReport mmd2(const Matrix& x, const Matrix& z, const std::optional<KernelSpec>& kernel = std::nullopt,
                       const std::optional<Vector>& weights = std::nullopt,
                       MmdEstimator estimator = MmdEstimator::kBiased);

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample permutation test on the biased MMD statistic.
PermutationTest mmd_permutation_test(const Matrix& x, const Matrix& z, const KernelSpec& kernel, RandomStream& stream,
                                     int permutations = 200);

/// Order-2 Renyi divergence D_2(target || source) between Gaussians. `value`
/// holds the log form (nats); meta.exponentiated holds exp(D_2). Infinite
/// when 2*cov_source - cov_target is not positive definite.
DiscrepancyReport renyi2_gaussian(const GaussianParams& target, const GaussianParams& source);

/// 2 (1 - 2 err), clamped to [0, 2].
double proxy_a_from_error(double heldout_error);

/// Domain-classifier proxy for the H-delta-H divergence: a logistic
/// discriminator trained on a random half of each domain, evaluated on the
/// other half.
DiscrepancyReport proxy_a_distance(const Matrix& x, const Matrix& z, RandomStream& stream);

inline constexpr std::size_t kHistogramMaxDim = 3;

/// Hellinger distance between histograms on shared bins spanning the pooled range.
DiscrepancyReport hellinger_hist(const Matrix& x, const Matrix& z, int bins_per_dim);

/// Closed-form Hellinger distance between two Gaussians.
double gaussian_hellinger(const GaussianParams& a, const GaussianParams& b);

}  // namespace shiftlab
