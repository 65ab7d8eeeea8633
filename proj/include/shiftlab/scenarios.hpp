// Synthetic shift scenarios with analytic oracles.
//
// Every scenario is a pair of two-class Gaussian mixtures, one per domain.
// Concept-shift scenarios (and the 1-d covariate generator) instead draw
// labels from a logistic posterior p(y=+1|x) = sigmoid(w.x + b) that may
// differ per domain; the marginal is then the class-conditional mixture
// itself.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/random.hpp"

#include <string>

namespace shiftlab {

struct GaussianParams {
  Vector mean;
  Matrix cov;

  /// Throws unless cov is symmetric (1e-12) with strictly positive eigenvalues.
  void check() const;
  double log_density(const Eigen::Ref<const Vector>& x) const;
};

/// Class-conditional Gaussians indexed by class slot (0 -> y=-1, 1 -> y=+1).
struct GaussianClassConditional {
  std::array<GaussianParams, 2> classes;

  std::size_t dim() const { return static_cast<std::size_t>(classes[0].mean.size()); }
  void check() const;
};

/// Labels drawn from sigmoid(coef.x + intercept) instead of the mixture
/// component identity.
struct LogisticPosterior {
  Vector coef;
  double intercept = 0.0;

  double prob_positive(const Eigen::Ref<const Vector>& x) const;
};

struct DomainSpec {
  PriorPair priors{0.5, 0.5};
  GaussianClassConditional conditionals;
  std::optional<LogisticPosterior> posterior;

  /// Marginal density p(x) of the domain.
  double density(const Eigen::Ref<const Vector>& x) const;
  /// p(y=+1 | x).
  double prob_positive(const Eigen::Ref<const Vector>& x) const;
  void check() const;
};

enum class ShiftKind { kPrior, kCovariate, kConcept, kGeneral };

std::string to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(const std::string& name);

struct ShiftScenario {
  ShiftKind kind = ShiftKind::kGeneral;
  DomainSpec source;
  DomainSpec target;

  std::size_t dim() const { return source.conditionals.dim(); }
  /// Throws if the kind tag's defining invariant is violated.
  void check() const;
};

struct DomainSample {
  Dataset source;
  Dataset target;  // labels kept for evaluation only
};

/// Draws n labeled rows from one domain.
Dataset sample_domain(const DomainSpec& domain, std::size_t n, RandomStream& stream);

DomainSample sample_scenario(const ShiftScenario& scenario, std::size_t n, std::size_t m, RandomStream& stream);

/// Prior shift over shared class-conditionals.
ShiftScenario make_prior_shift(const PriorPair& priors_source, const PriorPair& priors_target,
                               const GaussianClassConditional& conditionals);

DomainSample gen_prior_shift(const PriorPair& priors_source, const PriorPair& priors_target,
                             const GaussianClassConditional& conditionals, std::size_t n, std::size_t m,
                             RandomStream& stream);

/// Default shared posterior of the 1-d covariate scenario: sigmoid(2x).
LogisticPosterior covariate_1d_posterior();

/// Source N(0,1), target N(0, sigma_t^2), shared logistic posterior.
ShiftScenario make_covariate_shift_1d(double sigma_t);

DomainSample gen_covariate_shift_1d(double sigma_t, std::size_t n, std::size_t m, RandomStream& stream);

/// Shared marginal, posterior offset moved from source_offset to target_offset.
ShiftScenario make_concept_shift_1d(double source_offset, double target_offset, double slope = 2.0);

/// Exact p_T(x) / p_S(x) at each row of points.
Vector true_importance_weights(const ShiftScenario& scenario, const Matrix& points);

/// p_T(y) / p_S(y) per class slot; requires a prior-shift scenario.
PriorPair true_class_weights(const ShiftScenario& scenario);

struct BayesErrorResult {
  double value = 0.0;
  double error_estimate = 0.0;  // quadrature error bound or Monte Carlo standard error
  bool monte_carlo = false;
};

/// Minimal 0/1 risk in a domain. Quadrature in 1-d and 2-d, Monte Carlo above.
BayesErrorResult bayes_error(const DomainSpec& domain, RandomStream* stream = nullptr,
                             std::size_t mc_samples = 200000);

/// Exact 0/1 risk of the linear rule sign(coef.x + intercept) (ties -> +1)
/// in a domain. Closed form for Gaussian-mixture labels, quadrature in 1-d for
/// logistic-posterior labels.
double linear_rule_risk(const DomainSpec& domain, const Vector& coef, double intercept);

/// Order-2 Renyi-type integral of two Gaussians, exp(D_2(target || source)).
/// Infinite when 2*cov_source - cov_target is not positive definite.
double gaussian_renyi2_exp(const GaussianParams& target, const GaussianParams& source);

/// Single Gaussian moment-matched to a domain's marginal.
GaussianParams moment_match(const DomainSpec& domain);

}  // namespace shiftlab
