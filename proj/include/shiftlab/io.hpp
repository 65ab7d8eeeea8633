// File formats: dataset and weight CSVs, model / projection / scenario JSON.
#pragma once

#include "shiftlab/classifiers.hpp"
#include "shiftlab/core.hpp"
#include "shiftlab/scenarios.hpp"
#include "shiftlab/subspace.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace shiftlab {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Header `f0,...,f{D-1}[,label]`, one sample per row, labels -1/1.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Single column with header `weight`.
void write_weights_csv(const std::filesystem::path& path, const Vector& weights);
Vector read_weights_csv(const std::filesystem::path& path);

/// Writes text, creating parent directories; throws kIo on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Parses JSON; syntax errors throw kInvalidArgument naming the byte offset.
nlohmann::json parse_json(const std::string& text, const std::string& origin);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Doubles with +-inf written as "inf" / "-inf" and NaN as null.
nlohmann::json json_number(double value);
/// Inverse of json_number; accepts numbers and the "inf" strings.
double number_from_json(const nlohmann::json& j, const std::string& what);

nlohmann::json matrix_to_json(const Matrix& m);  // row-major nested arrays
Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, const std::string& what);

/// {coef:[...], intercept, loss, lambda}
nlohmann::json model_to_json(const LinearModel& model);
LinearModel model_from_json(const nlohmann::json& j);

/// Row-major basis plus centring records; alignment and target basis when present.
nlohmann::json projection_to_json(const Projection& p);

/// A scenario together with the sample sizes and seed used to draw it.
struct ScenarioConfig {
  ShiftScenario scenario;
  std::size_t n = 500;
  std::size_t m = 500;
  std::uint64_t seed = 0;
  nlohmann::json description;  // the normalized JSON the scenario came from
};

/// Accepted forms:
///   {kind: "covariate_1d", sigma_T, n, m, seed}
///   {kind: "concept_1d", source_offset, target_offset, slope, n, m, seed}
///   {kind: "prior"|"covariate"|"concept"|"general",
///    source: {priors, means, covs, posterior?}, target: {...}, n, m, seed}
/// Priors are ordered (p(y=-1), p(y=+1)); means and covs are per class slot,
/// covariances row-major; posterior is {coef, intercept}.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ShiftScenario& scenario);

}  // namespace shiftlab
