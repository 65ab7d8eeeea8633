#include "shiftlab/bounds.hpp"

#include "shiftlab/classifiers.hpp"
#include "shiftlab/discrepancy.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace shiftlab {

double pac_bound(double hypothesis_count, double n, double delta) {
  require(hypothesis_count >= 1.0 && n >= 1.0 && delta > 0.0 && delta < 1.0,
          "pac_bound: need |H| >= 1, n >= 1, 0 < delta < 1");
  return std::sqrt((std::log(hypothesis_count) + std::log(2.0 / delta)) / (2.0 * n));
}

double cortes_iw_bound(double d2, double c, double n, double delta) {
  require(!std::isnan(d2) && d2 >= 1.0, "cortes_iw_bound: exponentiated divergence must be >= 1");
  require(c > 0.0 && n > c && delta > 0.0 && delta < 1.0, "cortes_iw_bound: need c > 0, n > c, 0 < delta < 1");
  if (std::isinf(d2)) return std::numeric_limits<double>::infinity();
  const double inner = (c / n) * std::log(2.0 * n * std::numbers::e / c) + std::log(4.0 / delta) / n;
  return std::pow(2.0, 1.25) * std::sqrt(d2) * std::pow(inner, 3.0 / 8.0);
}

double ben_david_bound(double joint_error, double divergence, double complexity) {
  require(joint_error >= 0.0 && joint_error <= 1.0, "ben_david_bound: joint error outside [0, 1]");
  require(divergence >= 0.0 && divergence <= 2.0, "ben_david_bound: divergence outside [0, 2]");
  require(complexity >= 0.0 && std::isfinite(complexity), "ben_david_bound: complexity must be nonnegative");
  return joint_error + 0.5 * divergence + complexity;
}

nlohmann::json BoundInputs::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["m"] = m;
  j["hypothesis_count"] = hypothesis_count;
  j["pseudo_dimension"] = pseudo_dimension;
  j["delta"] = delta;
  if (std::isinf(d2_exponentiated)) {
    j["d2_exponentiated"] = "inf";
  } else {
    j["d2_exponentiated"] = d2_exponentiated;
  }
  j["joint_error"] = joint_error;
  j["divergence"] = divergence;
  j["complexity"] = complexity;
  j["meta"] = meta;
  return j;
}

BoundInputs estimate_bound_terms(const ShiftScenario& scenario, const Dataset& source, const Dataset& target,
                                 RandomStream& stream, double complexity, double delta) {
  require(source.labeled(), "bound terms: source labels required");
  require(target.labeled(), "bound terms: target labels required (synthetic scenarios only)");
  require(source.dim() == target.dim() && source.dim() == scenario.dim(), "bound terms: dimension mismatch",
          ErrorCode::kDimensionMismatch);

  BoundInputs b;
  b.n = static_cast<double>(source.rows());
  b.m = static_cast<double>(target.rows());
  b.pseudo_dimension = static_cast<double>(source.dim()) + 1.0;
  b.delta = delta;
  b.complexity = complexity;

  // Joint models: logistic fits on the pooled sample at several domain mixes.
  Dataset pooled(vstack(source.features, target.features), [&] {
    std::vector<int> y = source.y();
    y.insert(y.end(), target.y().begin(), target.y().end());
    return y;
  }());
  double best = std::numeric_limits<double>::infinity();
  double best_mix = 0.5;
  for (double mix : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Vector w(static_cast<Eigen::Index>(pooled.rows()));
    const double total = b.n + b.m;
    w.head(source.features.rows()).setConstant((1.0 - mix) * total / b.n);
    w.tail(target.features.rows()).setConstant(mix * total / b.m);
    TrainOptions opts;
    opts.max_iterations = 2000;
    const auto fit = train_weighted(pooled, w, LossKind::kLogistic, 1e-4, opts);
    const double sum = linear_rule_risk(scenario.source, fit.model.coef, fit.model.intercept) +
                       linear_rule_risk(scenario.target, fit.model.coef, fit.model.intercept);
    if (sum < best) {
      best = sum;
      best_mix = mix;
    }
  }
  b.joint_error = std::min(best, 1.0);

  const auto pad = proxy_a_distance(source.features, target.features, stream);
  b.divergence = pad.value;

  const auto gt = moment_match(scenario.target);
  const auto gs = moment_match(scenario.source);
  b.d2_exponentiated = gaussian_renyi2_exp(gt, gs);

  b.meta["joint_error_method"] = "min over pooled logistic fits of analytic e_S + e_T";
  b.meta["joint_error_mix"] = best_mix;
  b.meta["divergence_method"] = "proxy A-distance (domain classifier)";
  b.meta["d2_method"] = "moment-matched scenario Gaussians";
  b.meta["complexity"] = "caller supplied";
  return b;
}

}  // namespace shiftlab
