// Generalization-bound calculators.
#pragma once

#include "shiftlab/core.hpp"
#include "shiftlab/random.hpp"
#include "shiftlab/scenarios.hpp"

#include <json.hpp>

namespace shiftlab {

/// sqrt((ln|H| + ln(2/delta)) / (2n)) for a finite hypothesis class.
double pac_bound(double hypothesis_count, double n, double delta);

/// 2^{5/4} sqrt(d2) ((c/n) ln(2ne/c) + (1/n) ln(4/delta))^{3/8}, with d2 the
/// exponentiated order-2 Renyi divergence. Infinite d2 gives an infinite bound.
double cortes_iw_bound(double d2_exponentiated, double pseudo_dimension, double n, double delta);

/// e*_{S,T} + d_{HdH} / 2 + C(H).
double ben_david_bound(double joint_error, double divergence, double complexity);

struct BoundInputs {
  double n = 0.0;
  double m = 0.0;
  double hypothesis_count = 1.0;
  double pseudo_dimension = 1.0;
  double delta = 0.05;
  double d2_exponentiated = 1.0;
  double joint_error = 0.0;  // e*_{S,T}
  double divergence = 0.0;   // proxy d_{HdH}
  double complexity = 0.0;   // C(H), supplied by the caller
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Estimates e*_{S,T} (best sum of analytic domain risks over linear models
/// trained on the pooled labelled data), the proxy divergence, and d2 from
/// moment-matched scenario Gaussians. Requires target labels.
BoundInputs estimate_bound_terms(const ShiftScenario& scenario, const Dataset& source, const Dataset& target,
                                 RandomStream& stream, double complexity = 0.0, double delta = 0.05);

}  // namespace shiftlab
