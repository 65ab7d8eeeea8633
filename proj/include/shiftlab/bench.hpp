// Benchmark harness: experiment configs, the method registry, seeded trial
// execution, report assembly and plot-data emission.
#pragma once

#include "shiftlab/classifiers.hpp"
#include "shiftlab/core.hpp"
#include "shiftlab/io.hpp"
#include "shiftlab/random.hpp"
#include "shiftlab/scenarios.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shiftlab {

/// Weight cap applied by the "minimax" method unless its config sets "cap"
/// (null disables the cap).
inline constexpr double kDefaultMinimaxCap = 10.0;

struct MethodSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

/// Names accepted in a method list, in registry order.
const std::vector<std::string>& registered_methods();

/// Parses "name" or {"name": ..., params...}; unknown names throw with the registry listed.
MethodSpec method_from_json(const nlohmann::json& j);

/// Source sample with labels and target sample whose labels the harness keeps
/// for evaluation only.
struct LoadedData {
  Dataset source;
  Dataset target;
};

struct DataSource {
  std::optional<ScenarioConfig> scenario;
  std::optional<std::filesystem::path> source_csv;
  std::optional<std::filesystem::path> target_csv;

  /// Scenario draws use `stream`; CSV data is returned as read.
  LoadedData load(std::size_t n, std::size_t m, RandomStream& stream) const;
  std::size_t default_n() const;
  std::size_t default_m() const;
  nlohmann::json to_json() const;
};

/// Reads "scenario" (object), "data" ({source, target} CSV paths relative to
/// base_dir), or a top-level scenario object carrying "kind".
DataSource data_source_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct ExperimentConfig {
  DataSource data;
  std::vector<MethodSpec> methods;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> sizes;  // source sizes; defaults to the scenario n
  LossKind loss = LossKind::kLogistic;
  double lambda = 1e-3;
  double delta = 0.05;
  double complexity = 0.0;
  bool discrepancy = true;
  bool bounds = true;

  nlohmann::json to_json() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// What an adaptation method may see: labelled source, unlabelled target, and
/// (for oracle methods only) the generating scenario.
struct MethodInput {
  const Dataset& source;
  const Dataset& target;  // no labels
  const ShiftScenario* scenario = nullptr;
  LossKind loss = LossKind::kLogistic;
  double lambda = 1e-3;
};

struct MethodOutput {
  std::vector<int> source_predictions;
  std::vector<int> target_predictions;
  std::optional<WeightVector> weights;     // importance weights on the source sample
  std::optional<LinearModel> model;        // set when the rule acts on input features
  std::optional<nlohmann::json> artifact;  // projection or other method-specific output
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// Runs one registered method. Throws Error on failure.
MethodOutput run_method(const MethodSpec& spec, const MethodInput& input, RandomStream& stream);

/// Importance weights from a weighting method (unweighted, true_weights,
/// gaussian_ratio, kde_ratio, kmm, kliep, lsif, voronoi, class_weights).
WeightVector estimate_weights(const MethodSpec& spec, const MethodInput& input, RandomStream& stream);
bool is_weighting_method(const std::string& name);

/// Raised when a method throws inside a trial.
class MethodFailure : public Error {
 public:
  MethodFailure(std::string method, std::size_t trial, std::size_t n, const std::string& what);
  const std::string& method() const { return method_; }
  std::size_t trial() const { return trial_; }

 private:
  std::string method_;
  std::size_t trial_;
};

struct BenchOutput {
  nlohmann::json report;  // deterministic sections plus "timings"
  std::string csv;        // per-trial rows, deterministic
};

/// Trial t at size index s uses S = RandomStream(seed, t).substream(s): data
/// from S.substream(0), shared discrepancy and bound terms from
/// S.substream(1), method k from S.substream(100 + k). Results merge in
/// (size, trial, method) order regardless of `parallel`.
BenchOutput run_bench(const ExperimentConfig& config, unsigned parallel = 1);

/// Report without its "timings" section.
nlohmann::json deterministic_sections(const nlohmann::json& report);

/// Recomputes the aggregates section from the trial records.
nlohmann::json aggregate_trials(const nlohmann::json& trials);

/// kind in {weights-vs-true, risk-vs-n, bound-vs-gap}. Throws when the
/// report lacks the series.
std::string plot_data_csv(const nlohmann::json& report, const std::string& kind);

}  // namespace shiftlab
