// Importance-weight estimators for covariate shift.
//
// Each estimator returns one nonnegative weight per source sample,
// approximating p_T(x_i) / p_S(x_i). The direct estimators (KMM, KLIEP) carry
// the constraint set they were solved under so callers can check feasibility.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/kernels.hpp"
#include "shiftlab/random.hpp"

#include <optional>
#include <string>

namespace shiftlab {

struct WeightConstraints {
  std::optional<double> mean_deviation;  // eps: |mean(w) - 1| <= eps
  std::optional<double> cap;             // B: w_i <= B
};

struct WeightVector {
  Vector values;
  WeightConstraints constraints;
  std::string estimator;
  // Solver diagnostics where applicable.
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = true;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  /// Largest violation of nonnegativity and the recorded constraints.
  double infeasibility() const;
  /// Copy rescaled to mean one.
  WeightVector normalized() const;
};

WeightVector unit_weights(std::size_t n);

/// Maximum-likelihood Gaussian fit per domain, ratio of fitted densities.
WeightVector gaussian_ratio_weights(const Dataset& source, const Dataset& target);

inline constexpr double kKdeDensityFloor = 1e-300;
inline constexpr double kDefaultWeightCap = 1000.0;

/// Ratio of Gaussian kernel density estimates. The source KDE at x_i
/// includes x_i. Weights whose source density underflows are set to
/// kDefaultWeightCap and counted in `floored`.
struct KdeWeights {
  WeightVector weights;
  std::size_t floored = 0;
};
KdeWeights kde_ratio_weights(const Dataset& source, const Dataset& target, double bandwidth_source,
                             double bandwidth_target);

struct KmmOptions {
  std::optional<KernelSpec> kernel;     // median heuristic when empty
  double cap = kDefaultWeightCap;       // B
  std::optional<double> mean_deviation; // default (sqrt(n) - 1) / sqrt(n)
  double tolerance = 1e-6;
  int budget = 50000;
};

/// Kernel mean matching: minimizes (1/n^2) w'Kw - (2/(nm)) kappa'w over the box
/// [0, B] intersected with the mean band. `objective` is that value;
/// `kkt_residual` refers to the same problem multiplied by n.
WeightVector kmm_weights(const Dataset& source, const Dataset& target, const KmmOptions& options = {});

inline constexpr std::size_t kDefaultCenters = 100;

/// Up to kDefaultCenters target rows chosen by a seeded subsample.
Matrix default_centers(const Dataset& target, RandomStream& stream, std::size_t count = kDefaultCenters);

/// Linear-in-basis ratio model w(x) = sum_l alpha_l k(x, c_l), alpha >= 0.
struct BasisRatioModel {
  Matrix centers;
  KernelSpec kernel;
  Vector alpha;

  Vector evaluate(const Matrix& points) const;
};

struct KliepResult {
  WeightVector weights;
  BasisRatioModel model;
};

/// Maximizes mean log w(z_j) subject to mean w(x_i) = 1.
KliepResult kliep_weights(const Dataset& source, const Dataset& target, const Matrix& centers,
                          const std::optional<KernelSpec>& kernel = std::nullopt);

struct LsifResult {
  WeightVector weights;
  BasisRatioModel model;
};

/// Minimizes 1/2 a'Ha - h'a + lambda |a|_1 over a >= 0.
LsifResult lsif_weights(const Dataset& source, const Dataset& target, const Matrix& centers,
                        const std::optional<KernelSpec>& kernel = std::nullopt, double lambda = 1e-3);

/// Count of target samples whose nearest source sample is x_i (ties to the
/// lowest index), plus one with Laplace smoothing.
WeightVector voronoi_weights(const Dataset& source, const Dataset& target, bool laplace);

/// Pearson correlation.
double pearson(const Vector& a, const Vector& b);

}  // namespace shiftlab
