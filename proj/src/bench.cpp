#include "shiftlab/bench.hpp"

#include "shiftlab/bounds.hpp"
#include "shiftlab/discrepancy.hpp"
#include "shiftlab/kernels.hpp"
#include "shiftlab/robust.hpp"
#include "shiftlab/subspace.hpp"
#include "shiftlab/weights.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace shiftlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Registry: method name and the parameter keys it accepts.
const std::vector<std::pair<std::string, std::set<std::string>>>& registry() {
  static const std::vector<std::pair<std::string, std::set<std::string>>> r = {
      {"unweighted", {}},
      {"true_weights", {}},
      {"gaussian_ratio", {}},
      {"kde_ratio", {"bandwidth_source", "bandwidth_target"}},
      {"kmm", {"bandwidth", "cap", "eps", "tolerance", "budget"}},
      {"kliep", {"bandwidth", "centers"}},
      {"lsif", {"bandwidth", "centers", "lambda"}},
      {"voronoi", {"laplace", "normalize"}},
      {"class_weights", {}},
      {"subspace_align", {"d", "fraction"}},
      {"tca", {"d", "mu", "bandwidth"}},
      {"rba", {"order"}},
      {"minimax", {"eps", "cap"}},
  };
  return r;
}

const std::set<std::string> kWeightingMethods = {"unweighted", "true_weights", "gaussian_ratio", "kde_ratio", "kmm",
                                                 "kliep",      "lsif",         "voronoi",        "class_weights"};

std::string registry_listing() {
  std::string s;
  for (const auto& [name, keys] : registry()) s += (s.empty() ? "" : ", ") + name;
  return s;
}

double param_double(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  return number_from_json(p.at(key), std::string("parameter '") + key + "'");
}

std::optional<double> param_optional(const json& p, const char* key) {
  if (!p.contains(key) || p.at(key).is_null()) return std::nullopt;
  return number_from_json(p.at(key), std::string("parameter '") + key + "'");
}

int param_int(const json& p, const char* key, int fallback) {
  if (!p.contains(key)) return fallback;
  require(p.at(key).is_number_integer(), std::string("parameter '") + key + "': expected an integer");
  return p.at(key).get<int>();
}

bool param_bool(const json& p, const char* key, bool fallback) {
  if (!p.contains(key)) return fallback;
  require(p.at(key).is_boolean(), std::string("parameter '") + key + "': expected true or false");
  return p.at(key).get<bool>();
}

std::optional<KernelSpec> param_kernel(const json& p) {
  const auto bw = param_optional(p, "bandwidth");
  if (!bw) return std::nullopt;
  auto spec = KernelSpec::gaussian(*bw);
  spec.check();
  return spec;
}

// Rule-of-thumb KDE bandwidth: mean feature standard deviation times
// (4 / ((d + 2) n))^{1 / (d + 4)}.
double silverman_bandwidth(const Matrix& x) {
  const auto n = static_cast<double>(x.rows());
  const auto d = static_cast<double>(x.cols());
  const Matrix c = x.rowwise() - x.colwise().mean();
  const double sd = (c.colwise().squaredNorm().array() / std::max(n - 1.0, 1.0)).sqrt().mean();
  return std::max(sd, 1e-12) * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
}

const ShiftScenario& need_scenario(const MethodInput& in, const std::string& method) {
  require(in.scenario != nullptr, "method '" + method + "' needs a generating scenario");
  return *in.scenario;
}

std::vector<int> labels_of(const Vector& scores_or_posterior, double threshold) {
  std::vector<int> out(static_cast<std::size_t>(scores_or_posterior.size()));
  for (Eigen::Index i = 0; i < scores_or_posterior.size(); ++i) {
    out[static_cast<std::size_t>(i)] = scores_or_posterior(i) >= threshold ? 1 : -1;
  }
  return out;
}

json weight_diagnostics(const WeightVector& w) {
  const double sum = w.values.sum();
  const double sq = w.values.squaredNorm();
  return {{"estimator", w.estimator},
          {"converged", w.converged},
          {"iterations", w.iterations},
          {"objective", json_number(w.objective)},
          {"kkt_residual", json_number(w.kkt_residual)},
          {"infeasibility", json_number(w.infeasibility())},
          {"max_weight", json_number(w.values.maxCoeff())},
          {"effective_sample_size", json_number(sq > 0.0 ? sum * sum / sq : 0.0)}};
}

double zero_one_rate(const std::vector<int>& pred, const std::vector<int>& y, const Vector* w) {
  double err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (pred[i] != y[i]) err += w ? (*w)(static_cast<Eigen::Index>(i)) : 1.0;
  }
  return err / static_cast<double>(y.size());
}

bool analytic_risk_available(const DomainSpec& d) { return !d.posterior || d.conditionals.dim() == 1; }

json optional_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

struct UnitResult {
  json stats;
  std::vector<json> records;
  std::vector<json> timings;
  json weights_series = json::array();
};

}  // namespace

const std::vector<std::string>& registered_methods() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, keys] : registry()) v.push_back(name);
    return v;
  }();
  return names;
}

bool is_weighting_method(const std::string& name) { return kWeightingMethods.count(name) > 0; }

MethodSpec method_from_json(const json& j) {
  MethodSpec spec;
  if (j.is_string()) {
    spec.name = j.get<std::string>();
  } else {
    require(j.is_object() && j.contains("name") && j.at("name").is_string(),
            "method entries must be a name or an object with a 'name' field");
    spec.name = j.at("name").get<std::string>();
    spec.params = j;
    spec.params.erase("name");
  }
  const auto it = std::find_if(registry().begin(), registry().end(), [&](const auto& e) { return e.first == spec.name; });
  require(it != registry().end(), "unknown method '" + spec.name + "'; registered methods: " + registry_listing());
  for (const auto& [key, value] : spec.params.items()) {
    require(it->second.count(key) > 0, "method '" + spec.name + "': unknown parameter '" + key + "'");
  }
  return spec;
}

LoadedData DataSource::load(std::size_t n, std::size_t m, RandomStream& stream) const {
  if (scenario) {
    auto s = sample_scenario(scenario->scenario, n, m, stream);
    return {std::move(s.source), std::move(s.target)};
  }
  require(source_csv && target_csv, "data source: scenario or source/target CSV paths required");
  LoadedData d{read_dataset_csv(*source_csv), read_dataset_csv(*target_csv)};
  require(d.source.labeled(), "source CSV must carry labels");
  require(d.source.dim() == d.target.dim(), "source and target CSV dimensions differ", ErrorCode::kDimensionMismatch);
  return d;
}

std::size_t DataSource::default_n() const { return scenario ? scenario->n : 0; }
std::size_t DataSource::default_m() const { return scenario ? scenario->m : 0; }

json DataSource::to_json() const {
  if (scenario) return {{"scenario", scenario->description}};
  return {{"data", {{"source", source_csv->string()}, {"target", target_csv->string()}}}};
}

DataSource data_source_from_json(const json& j, const fs::path& base_dir) {
  require(j.is_object(), "config: expected a JSON object");
  DataSource d;
  if (j.contains("scenario")) {
    d.scenario = scenario_from_json(j.at("scenario"));
  } else if (j.contains("data")) {
    const json& data = j.at("data");
    require(data.is_object() && data.contains("source") && data.contains("target"),
            "config.data: expected {source, target} CSV paths");
    auto resolve = [&](const json& p) {
      fs::path path = p.get<std::string>();
      return path.is_absolute() ? path : base_dir / path;
    };
    d.source_csv = resolve(data.at("source"));
    d.target_csv = resolve(data.at("target"));
  } else if (j.contains("kind")) {
    d.scenario = scenario_from_json(j);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "config: need 'scenario' or 'data'");
  }
  return d;
}

json ExperimentConfig::to_json() const {
  json j = data.to_json();
  j["methods"] = json::array();
  for (const auto& m : methods) {
    json e = m.params;
    e["name"] = m.name;
    j["methods"].push_back(e);
  }
  j["trials"] = trials;
  j["seed"] = seed;
  j["sizes"] = sizes;
  j["loss"] = to_string(loss);
  j["lambda"] = lambda;
  j["delta"] = delta;
  j["complexity"] = complexity;
  j["discrepancy"] = discrepancy;
  j["bounds"] = bounds;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  c.data = data_source_from_json(j, base_dir);
  require(j.contains("methods") && j.at("methods").is_array() && !j.at("methods").empty(),
          "config: 'methods' must be a nonempty array");
  for (const auto& m : j.at("methods")) c.methods.push_back(method_from_json(m));
  if (j.contains("trials")) {
    require(j.at("trials").is_number_integer() && j.at("trials").get<long long>() >= 1, "config.trials: must be >= 1");
    c.trials = j.at("trials").get<std::size_t>();
  }
  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0), "config.seed: expected a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  } else if (c.data.scenario) {
    c.seed = c.data.scenario->seed;
  }
  if (j.contains("sizes")) {
    require(j.at("sizes").is_array() && !j.at("sizes").empty(), "config.sizes: expected a nonempty array");
    for (const auto& s : j.at("sizes")) {
      require(s.is_number_integer() && s.get<long long>() >= 2, "config.sizes: entries must be integers >= 2");
      c.sizes.push_back(s.get<std::size_t>());
    }
    require(c.data.scenario.has_value(), "config.sizes: only available with a scenario");
  } else if (c.data.scenario) {
    c.sizes = {c.data.scenario->n};
  }
  if (j.contains("loss")) c.loss = loss_from_string(j.at("loss").get<std::string>());
  require(c.loss != LossKind::kZeroOne, "config.loss: zero-one loss cannot be trained");
  c.lambda = param_double(j, "lambda", c.lambda);
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "config.lambda: must be nonnegative");
  c.delta = param_double(j, "delta", c.delta);
  require(c.delta > 0.0 && c.delta < 1.0, "config.delta: must lie in (0, 1)");
  c.complexity = param_double(j, "complexity", c.complexity);
  require(c.complexity >= 0.0, "config.complexity: must be nonnegative");
  c.discrepancy = param_bool(j, "discrepancy", c.discrepancy);
  c.bounds = param_bool(j, "bounds", c.bounds);
  static const std::set<std::string> known = {"scenario", "data",  "kind",  "methods",    "trials",      "seed",
                                              "sizes",    "loss",  "lambda", "delta",     "complexity",  "discrepancy",
                                              "bounds",   "sigma_T", "source_offset", "target_offset", "slope",
                                              "source", "target", "n", "m"};
  for (const auto& [key, value] : j.items()) require(known.count(key) > 0, "config: unknown field '" + key + "'");
  return c;
}

WeightVector estimate_weights(const MethodSpec& spec, const MethodInput& in, RandomStream& stream) {
  const json& p = spec.params;
  const auto& name = spec.name;
  if (name == "unweighted") return unit_weights(in.source.rows());
  if (name == "true_weights") {
    WeightVector w;
    w.values = true_importance_weights(need_scenario(in, name), in.source.features);
    w.estimator = "true_weights";
    return w;
  }
  if (name == "gaussian_ratio") return gaussian_ratio_weights(in.source, in.target);
  if (name == "kde_ratio") {
    const double hs = param_double(p, "bandwidth_source", silverman_bandwidth(in.source.features));
    const double ht = param_double(p, "bandwidth_target", silverman_bandwidth(in.target.features));
    return kde_ratio_weights(in.source, in.target, hs, ht).weights;
  }
  if (name == "kmm") {
    KmmOptions o;
    o.kernel = param_kernel(p);
    o.cap = param_double(p, "cap", o.cap);
    o.mean_deviation = param_optional(p, "eps");
    o.tolerance = param_double(p, "tolerance", o.tolerance);
    o.budget = param_int(p, "budget", o.budget);
    return kmm_weights(in.source, in.target, o);
  }
  if (name == "kliep" || name == "lsif") {
    const int count = param_int(p, "centers", static_cast<int>(kDefaultCenters));
    require(count >= 1, "parameter 'centers' must be >= 1");
    const Matrix centers = default_centers(in.target, stream, static_cast<std::size_t>(count));
    if (name == "kliep") return kliep_weights(in.source, in.target, centers, param_kernel(p)).weights;
    return lsif_weights(in.source, in.target, centers, param_kernel(p), param_double(p, "lambda", 1e-3)).weights;
  }
  if (name == "voronoi") {
    auto w = voronoi_weights(in.source, in.target, param_bool(p, "laplace", true));
    return param_bool(p, "normalize", true) ? w.normalized() : w;
  }
  if (name == "class_weights") {
    const auto& s = need_scenario(in, name);
    return class_weight_vector(in.source.y(), s.source.priors, s.target.priors);
  }
  throw Error(ErrorCode::kInvalidArgument, "method '" + name + "' does not produce importance weights");
}

MethodOutput run_method(const MethodSpec& spec, const MethodInput& in, RandomStream& stream) {
  require(!in.target.labeled(), "internal: adaptation methods must not receive target labels");
  const json& p = spec.params;
  const auto& name = spec.name;
  MethodOutput out;

  if (is_weighting_method(name)) {
    WeightVector w = estimate_weights(spec, in, stream);
    const auto fit = train_weighted(in.source, w.values, in.loss, in.lambda);
    out.source_predictions = predict(fit.model, in.source.features).labels;
    out.target_predictions = predict(fit.model, in.target.features).labels;
    out.diagnostics = weight_diagnostics(w);
    out.diagnostics["train_converged"] = fit.converged;
    out.model = fit.model;
    out.weights = std::move(w);
    return out;
  }

  if (name == "subspace_align") {
    const int cap = static_cast<int>(std::min<std::size_t>(
        {in.source.dim(), in.source.rows() - 1, in.target.rows() - 1}));
    const int d = p.contains("d") ? param_int(p, "d", 1)
                                  : std::min(variance_dimension(in.source.features, param_double(p, "fraction", 0.95)), cap);
    const auto r = subspace_align(in.source.features, in.target.features, d);
    const auto fit = train_weighted(Dataset(r.mapped_source, in.source.y()), unit_weights(in.source.rows()).values,
                                    in.loss, in.lambda);
    out.source_predictions = predict(fit.model, r.mapped_source).labels;
    out.target_predictions = predict(fit.model, r.mapped_target).labels;
    out.artifact = projection_to_json(r.projection);
    out.diagnostics = {{"d", d}, {"train_converged", fit.converged}};
    return out;
  }

  if (name == "tca") {
    const int d = param_int(p, "d", 1);
    const auto r = tca(in.source.features, in.target.features, param_kernel(p), d, param_double(p, "mu", 1.0));
    const auto fit = train_weighted(Dataset(r.embedded_source, in.source.y()), unit_weights(in.source.rows()).values,
                                    in.loss, in.lambda);
    out.source_predictions = predict(fit.model, r.embedded_source).labels;
    out.target_predictions = predict(fit.model, r.embedded_target).labels;
    out.artifact = projection_to_json(r.projection);
    out.diagnostics = {{"d", d},
                       {"objective", json_number(r.objective)},
                       {"constraint_residual", json_number(r.constraint_residual)},
                       {"train_converged", fit.converged}};
    return out;
  }

  if (name == "rba") {
    RbaOptions o;
    o.moment_order = param_int(p, "order", 1);
    const auto r = rba_train(in.source, in.target, o);
    out.source_predictions = labels_of(r.model.posterior(in.source.features), 0.5);
    out.target_predictions = labels_of(r.target_posterior, 0.5);
    out.diagnostics = {{"gap", json_number(r.report.gap)},
                       {"iterations", r.report.iterations},
                       {"converged", r.report.converged},
                       {"moment_residual", json_number(r.moment_residual.cwiseAbs().maxCoeff())}};
    return out;
  }

  if (name == "minimax") {
    MinimaxOptions o;
    o.eps = param_double(p, "eps", o.eps);
    // Cap defaults to kDefaultMinimaxCap; an explicit null removes it.
    o.cap = p.contains("cap") ? param_optional(p, "cap") : std::optional<double>(kDefaultMinimaxCap);
    o.loss = in.loss;
    o.lambda = in.lambda;
    const auto r = minimax_weight_train(in.source, o);
    out.source_predictions = predict(r.model, in.source.features).labels;
    out.target_predictions = predict(r.model, in.target.features).labels;
    out.model = r.model;
    out.diagnostics = {{"worst_case_objective", json_number(worst_case_objective(r.model, in.source, o.eps, o.cap))},
                       {"gap", json_number(r.report.gap)},
                       {"iterations", r.report.iterations},
                       {"converged", r.report.converged}};
    return out;
  }

  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + name + "'; registered methods: " + registry_listing());
}

MethodFailure::MethodFailure(std::string method, std::size_t trial, std::size_t n, const std::string& what)
    : Error(ErrorCode::kNotConverged,
            "method '" + method + "' failed in trial " + std::to_string(trial) + " (n=" + std::to_string(n) + "): " + what),
      method_(std::move(method)),
      trial_(trial) {}

namespace {

UnitResult run_unit(const ExperimentConfig& cfg, std::size_t size_index, std::size_t trial) {
  using clock = std::chrono::steady_clock;
  const RandomStream size_stream = RandomStream(cfg.seed, trial).substream(size_index);
  RandomStream data_stream = size_stream.substream(0);
  const std::size_t n = cfg.sizes.empty() ? 0 : cfg.sizes[size_index];
  const LoadedData data = cfg.data.load(n, cfg.data.default_m(), data_stream);
  const std::size_t n_rows = data.source.rows();
  const std::size_t m_rows = data.target.rows();
  const Dataset target_view = data.target.unlabeled();
  const ShiftScenario* scenario = cfg.data.scenario ? &cfg.data.scenario->scenario : nullptr;

  UnitResult u;
  u.stats = {{"n", n_rows}, {"m", m_rows}, {"trial", trial}};

  // Shared discrepancy and bound terms.
  RandomStream shared_stream = size_stream.substream(1);
  const KernelSpec kernel = resolve_kernel(std::nullopt, data.source.features, data.target.features);
  if (cfg.discrepancy) {
    u.stats["mmd2"] = json_number(mmd2(data.source.features, data.target.features, kernel).value);
    u.stats["proxy_a_distance"] = json_number(proxy_a_distance(data.source.features, data.target.features, shared_stream).value);
  }
  std::optional<double> cortes, ben_david;
  std::optional<Vector> true_weights;
  if (scenario) true_weights = true_importance_weights(*scenario, data.source.features);
  if (cfg.bounds && scenario && data.target.labeled() && analytic_risk_available(scenario->source) &&
      analytic_risk_available(scenario->target)) {
    const auto terms = estimate_bound_terms(*scenario, data.source, data.target, shared_stream, cfg.complexity, cfg.delta);
    const double c = static_cast<double>(data.source.dim()) + 1.0;
    if (static_cast<double>(n_rows) > c) cortes = cortes_iw_bound(terms.d2_exponentiated, c, static_cast<double>(n_rows), cfg.delta);
    ben_david = ben_david_bound(terms.joint_error, terms.divergence, terms.complexity);
    u.stats["bound_terms"] = terms.to_json();
    u.stats["cortes_bound"] = optional_number(cortes);
    u.stats["ben_david_bound"] = optional_number(ben_david);
  }

  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    const auto& spec = cfg.methods[k];
    RandomStream method_stream = size_stream.substream(100 + k);
    const MethodInput input{data.source, target_view, scenario, cfg.loss, cfg.lambda};
    const auto start = clock::now();
    MethodOutput out;
    try {
      out = run_method(spec, input, method_stream);
    } catch (const std::exception& e) {
      throw MethodFailure(spec.name, trial, n_rows, e.what());
    }
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();

    json r;
    r["n"] = n_rows;
    r["m"] = m_rows;
    r["trial"] = trial;
    r["method"] = spec.name;
    r["source_risk"] = json_number(zero_one_rate(out.source_predictions, data.source.y(), nullptr));
    r["target_risk"] = data.target.labeled()
                           ? json_number(zero_one_rate(out.target_predictions, data.target.y(), nullptr))
                           : json(nullptr);
    std::optional<double> analytic;
    if (scenario && out.model && analytic_risk_available(scenario->target)) {
      analytic = linear_rule_risk(scenario->target, out.model->coef, out.model->intercept);
    }
    r["target_risk_analytic"] = optional_number(analytic);
    if (out.weights) {
      r["weighted_risk"] = json_number(zero_one_rate(out.source_predictions, data.source.y(), &out.weights->values));
      r["mmd2_weighted"] = cfg.discrepancy
                               ? json_number(mmd2(data.source.features, data.target.features, kernel, out.weights->values).value)
                               : json(nullptr);
      r["weight_pearson"] = nullptr;
      if (true_weights && out.weights->values.size() > 1) {
        const double sd = std::sqrt((out.weights->values.array() - out.weights->values.mean()).square().sum());
        if (sd > 0.0) r["weight_pearson"] = json_number(pearson(out.weights->values, *true_weights));
      }
      r["cortes_bound"] = optional_number(cortes);
      if (true_weights && spec.name != "unweighted") {
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n_rows) && size_index == 0 && trial == 0; ++i) {
          u.weights_series.push_back({{"x", json_number(data.source.features(i, 0))},
                                      {"true_weight", json_number((*true_weights)(i))},
                                      {"estimated_weight", json_number(out.weights->values(i))},
                                      {"method", spec.name}});
        }
      }
    } else {
      r["weighted_risk"] = r["source_risk"];
      r["mmd2_weighted"] = nullptr;
      r["weight_pearson"] = nullptr;
      r["cortes_bound"] = nullptr;
    }
    r["ben_david_bound"] = optional_number(ben_david);
    r["diagnostics"] = out.diagnostics;
    if (out.model) r["model"] = model_to_json(*out.model);
    u.records.push_back(std::move(r));
    u.timings.push_back({{"n", n_rows}, {"trial", trial}, {"method", spec.name}, {"seconds", seconds}});
  }
  return u;
}

const std::vector<std::string> kCsvColumns = {"n",           "m",           "trial",          "method",
                                              "source_risk", "target_risk", "target_risk_analytic",
                                              "weighted_risk", "mmd2_weighted", "weight_pearson",
                                              "cortes_bound", "ben_david_bound"};

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

const std::vector<std::string> kAggregateMetrics = {"source_risk", "target_risk", "target_risk_analytic",
                                                    "weighted_risk", "mmd2_weighted", "weight_pearson"};

}  // namespace

json aggregate_trials(const json& trials) {
  // Keyed by (n, method) in first-appearance order.
  std::vector<std::pair<std::size_t, std::string>> keys;
  std::map<std::pair<std::size_t, std::string>, std::vector<const json*>> groups;
  for (const auto& r : trials) {
    const auto key = std::make_pair(r.at("n").get<std::size_t>(), r.at("method").get<std::string>());
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  json out = json::array();
  for (const auto& key : keys) {
    json metrics = json::object();
    for (const auto& metric : kAggregateMetrics) {
      std::vector<double> v;
      for (const json* r : groups[key]) {
        if (r->contains(metric) && (*r)[metric].is_number()) v.push_back((*r)[metric].get<double>());
      }
      if (v.empty()) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      metrics[metric] = {{"mean", mean}, {"stddev", sd}, {"count", v.size()}};
    }
    out.push_back({{"n", key.first}, {"method", key.second}, {"metrics", metrics}});
  }
  return out;
}

BenchOutput run_bench(const ExperimentConfig& cfg, unsigned parallel) {
  require(!cfg.methods.empty(), "bench: no methods");
  const std::size_t size_count = cfg.sizes.empty() ? 1 : cfg.sizes.size();
  const std::size_t units = size_count * cfg.trials;
  std::vector<std::optional<UnitResult>> results(units);
  std::vector<std::exception_ptr> errors(units);

  const auto start = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      try {
        results[u] = run_unit(cfg, u / cfg.trials, u % cfg.trials);
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(units)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  // First failure in unit order, independent of scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json trials = json::array();
  json stats = json::array();
  json timings = json::array();
  json weights_series = json::array();
  for (auto& r : results) {
    for (auto& rec : r->records) trials.push_back(std::move(rec));
    for (auto& t : r->timings) timings.push_back(std::move(t));
    stats.push_back(std::move(r->stats));
    for (auto& w : r->weights_series) weights_series.push_back(std::move(w));
  }

  json risk_vs_n = json::array();
  json bound_vs_gap = json::array();
  for (const auto& r : trials) {
    if (!r["target_risk"].is_number()) continue;
    const double target = r["target_risk"].get<double>();
    risk_vs_n.push_back({{"n", r["n"]}, {"method", r["method"]}, {"trial", r["trial"]}, {"target_risk", target}});
    if (r["cortes_bound"].is_number() || r["cortes_bound"].is_string()) {
      bound_vs_gap.push_back({{"n", r["n"]},
                              {"method", r["method"]},
                              {"trial", r["trial"]},
                              {"bound_kind", "cortes_iw"},
                              {"bound", r["cortes_bound"]},
                              {"gap", target - r["weighted_risk"].get<double>()}});
    }
    if (r["ben_david_bound"].is_number()) {
      bound_vs_gap.push_back({{"n", r["n"]},
                              {"method", r["method"]},
                              {"trial", r["trial"]},
                              {"bound_kind", "ben_david"},
                              {"bound", r["ben_david_bound"]},
                              {"gap", target - r["source_risk"].get<double>()}});
    }
  }

  BenchOutput out;
  out.report["config"] = cfg.to_json();
  out.report["registered_methods"] = registered_methods();
  out.report["trials"] = trials;
  out.report["trial_stats"] = stats;
  out.report["aggregates"] = aggregate_trials(trials);
  out.report["series"] = {{"weights_vs_true", weights_series}, {"risk_vs_n", risk_vs_n}, {"bound_vs_gap", bound_vs_gap}};
  out.report["timings"] = {{"total_seconds", total}, {"threads", threads}, {"per_method", timings}};

  std::string csv;
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) csv += (c ? "," : "") + kCsvColumns[c];
  csv += '\n';
  for (const auto& r : trials) {
    for (std::size_t c = 0; c < kCsvColumns.size(); ++c) csv += (c ? "," : "") + csv_cell(r[kCsvColumns[c]]);
    csv += '\n';
  }
  out.csv = std::move(csv);
  return out;
}

json deterministic_sections(const json& report) {
  json j = report;
  j.erase("timings");
  return j;
}

std::string plot_data_csv(const json& report, const std::string& kind) {
  static const std::map<std::string, std::pair<std::string, std::vector<std::string>>> kinds = {
      {"weights-vs-true", {"weights_vs_true", {"x", "true_weight", "estimated_weight", "method"}}},
      {"risk-vs-n", {"risk_vs_n", {"n", "method", "trial", "target_risk"}}},
      {"bound-vs-gap", {"bound_vs_gap", {"n", "method", "trial", "bound_kind", "bound", "gap"}}},
  };
  const auto it = kinds.find(kind);
  require(it != kinds.end(), "plot kind '" + kind + "' unknown; expected weights-vs-true, risk-vs-n or bound-vs-gap");
  const auto& [key, columns] = it->second;
  require(report.is_object() && report.contains("series") && report["series"].contains(key) &&
              report["series"][key].is_array() && !report["series"][key].empty(),
          "report has no '" + key + "' series");
  std::string csv;
  for (std::size_t c = 0; c < columns.size(); ++c) csv += (c ? "," : "") + columns[c];
  csv += '\n';
  for (const auto& row : report["series"][key]) {
    for (std::size_t c = 0; c < columns.size(); ++c) csv += (c ? "," : "") + csv_cell(row[columns[c]]);
    csv += '\n';
  }
  return csv;
}

}  // namespace shiftlab
