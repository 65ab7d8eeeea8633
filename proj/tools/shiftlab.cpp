// shiftlab command-line front end.
#include "shiftlab/bench.hpp"
#include "shiftlab/bounds.hpp"
#include "shiftlab/discrepancy.hpp"
#include "shiftlab/io.hpp"
#include "shiftlab/kernels.hpp"
#include "shiftlab/weights.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shiftlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMethod = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
  std::string config;
  std::string out = "shiftlab_out";
  unsigned parallel = 1;
  std::optional<std::uint64_t> seed;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("shiftlab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SHIFTLAB_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::warn);
    spdlog::warn("SHIFTLAB_LOG='{}' not one of error, warn, info, debug; using warn", level);
  }
}

json load_config(const CommonOptions& o) {
  require(!o.config.empty(), "--config is required");
  return read_json_file(o.config);
}

fs::path config_dir(const CommonOptions& o) { return fs::path(o.config).parent_path(); }

void write_report(const CommonOptions& o, const json& report, const std::string& csv) {
  write_text_file(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  write_text_file(fs::path(o.out) / "report.csv", csv);
  spdlog::info("wrote {}/report.json and report.csv", o.out);
}

// Scenario draws mirror bench trial 0 at the first size.
struct Inputs {
  DataSource source;
  LoadedData data;
  std::uint64_t seed = 0;
  RandomStream stream{0};
};

Inputs load_inputs(const CommonOptions& o, const json& cfg) {
  Inputs in;
  in.source = data_source_from_json(cfg, config_dir(o));
  in.seed = o.seed ? *o.seed : (cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>()
                                                      : (in.source.scenario ? in.source.scenario->seed : 0));
  in.stream = RandomStream(in.seed, 0).substream(0);
  RandomStream data_stream = in.stream.substream(0);
  in.data = in.source.load(in.source.default_n(), in.source.default_m(), data_stream);
  spdlog::info("loaded source {}x{}, target {}x{}", in.data.source.rows(), in.data.source.dim(), in.data.target.rows(),
               in.data.target.dim());
  return in;
}

MethodSpec method_of(const json& cfg) {
  require(cfg.contains("method"), "config: missing 'method'");
  return method_from_json(cfg.at("method"));
}

template <class F>
auto as_method(const std::string& name, std::size_t n, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw MethodFailure(name, 0, n, e.what());
  }
}

std::string kv_csv(const std::vector<std::pair<std::string, json>>& rows, const char* key_name) {
  std::string csv = std::string(key_name) + ",value\n";
  for (const auto& [k, v] : rows) {
    csv += k + ",";
    if (v.is_number_float()) {
      csv += format_double(v.get<double>());
    } else if (v.is_string()) {
      csv += v.get<std::string>();
    } else if (!v.is_null()) {
      csv += v.dump();
    }
    csv += "\n";
  }
  return csv;
}

int cmd_generate(const CommonOptions& o) {
  const json cfg = load_config(o);
  Inputs in = load_inputs(o, cfg);
  require(in.source.scenario.has_value(), "generate: config must describe a scenario");
  const fs::path out = o.out;
  write_dataset_csv(out / "source.csv", in.data.source);
  write_dataset_csv(out / "target.csv", in.data.target);
  json scenario = in.source.scenario->description;
  scenario["seed"] = in.seed;
  write_text_file(out / "scenario.json", json({{"config", scenario},
                                               {"resolved", scenario_to_json(in.source.scenario->scenario)}})
                                                 .dump(2) + "\n");
  json report = {{"command", "generate"}, {"seed", in.seed}, {"files", {"source.csv", "target.csv", "scenario.json"}}};
  std::string csv = "domain,rows,dim,positive_fraction\n";
  for (const auto& [name, d] : {std::pair<std::string, const Dataset*>{"source", &in.data.source},
                                {"target", &in.data.target}}) {
    const auto priors = class_priors(*d);
    report[name] = {{"rows", d->rows()}, {"dim", d->dim()}, {"positive_fraction", priors[1]}};
    csv += name + "," + std::to_string(d->rows()) + "," + std::to_string(d->dim()) + "," + format_double(priors[1]) + "\n";
  }
  write_report(o, report, csv);
  return kExitOk;
}

int cmd_weights(const CommonOptions& o) {
  const json cfg = load_config(o);
  const MethodSpec spec = method_of(cfg);
  require(is_weighting_method(spec.name), "weights: method '" + spec.name + "' does not produce importance weights");
  Inputs in = load_inputs(o, cfg);
  const Dataset target = in.data.target.unlabeled();
  const ShiftScenario* scenario = in.source.scenario ? &in.source.scenario->scenario : nullptr;
  RandomStream method_stream = in.stream.substream(100);
  const MethodInput input{in.data.source, target, scenario};
  const WeightVector w =
      as_method(spec.name, in.data.source.rows(), [&] { return estimate_weights(spec, input, method_stream); });

  write_weights_csv(fs::path(o.out) / "weights.csv", w.values);
  json report = {{"command", "weights"},
                 {"method", spec.name},
                 {"params", spec.params},
                 {"seed", in.seed},
                 {"n", w.size()},
                 {"mean", w.values.mean()},
                 {"converged", w.converged},
                 {"iterations", w.iterations},
                 {"objective", json_number(w.objective)},
                 {"kkt_residual", json_number(w.kkt_residual)},
                 {"infeasibility", json_number(w.infeasibility())}};
  std::string csv = scenario ? "index,weight,true_weight\n" : "index,weight\n";
  std::optional<Vector> truth;
  if (scenario) {
    truth = true_importance_weights(*scenario, in.data.source.features);
    report["pearson_vs_true"] = json_number(pearson(w.values, *truth));
  }
  for (Eigen::Index i = 0; i < w.values.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(w.values(i));
    if (truth) csv += "," + format_double((*truth)(i));
    csv += "\n";
  }
  if (!w.converged) spdlog::warn("{} did not reach its tolerance in {} iterations", spec.name, w.iterations);
  write_report(o, report, csv);
  return kExitOk;
}

int cmd_adapt(const CommonOptions& o) {
  const json cfg = load_config(o);
  const MethodSpec spec = method_of(cfg);
  LossKind loss = cfg.contains("loss") ? loss_from_string(cfg.at("loss").get<std::string>()) : LossKind::kLogistic;
  require(loss != LossKind::kZeroOne, "config.loss: zero-one loss cannot be trained");
  const double lambda = cfg.contains("lambda") ? number_from_json(cfg.at("lambda"), "config.lambda") : 1e-3;
  Inputs in = load_inputs(o, cfg);
  const Dataset target = in.data.target.unlabeled();
  const ShiftScenario* scenario = in.source.scenario ? &in.source.scenario->scenario : nullptr;
  RandomStream method_stream = in.stream.substream(100);
  const MethodInput input{in.data.source, target, scenario, loss, lambda};
  const MethodOutput out =
      as_method(spec.name, in.data.source.rows(), [&] { return run_method(spec, input, method_stream); });

  const fs::path dir = o.out;
  if (out.model) write_text_file(dir / "model.json", model_to_json(*out.model).dump(2) + "\n");
  if (out.artifact) write_text_file(dir / "projection.json", out.artifact->dump(2) + "\n");
  std::string pred = "prediction\n";
  for (int y : out.target_predictions) pred += y > 0 ? "1\n" : "-1\n";
  write_text_file(dir / "predictions.csv", pred);

  auto rate = [](const std::vector<int>& p, const std::vector<int>& y) {
    std::size_t e = 0;
    for (std::size_t i = 0; i < y.size(); ++i) e += p[i] != y[i];
    return static_cast<double>(e) / static_cast<double>(y.size());
  };
  std::vector<std::pair<std::string, json>> rows = {{"source_risk", rate(out.source_predictions, in.data.source.y())}};
  if (in.data.target.labeled()) rows.emplace_back("target_risk", rate(out.target_predictions, in.data.target.y()));
  if (scenario && out.model && (!scenario->target.posterior || scenario->dim() == 1)) {
    rows.emplace_back("target_risk_analytic", linear_rule_risk(scenario->target, out.model->coef, out.model->intercept));
  }
  json report = {{"command", "adapt"}, {"method", spec.name}, {"params", spec.params}, {"seed", in.seed},
                 {"loss", to_string(loss)}, {"lambda", lambda}, {"diagnostics", out.diagnostics}};
  for (const auto& [k, v] : rows) report[k] = v;
  write_report(o, report, kv_csv(rows, "metric"));
  return kExitOk;
}

GaussianParams fit_gaussian(const Matrix& x) {
  GaussianParams g;
  g.mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - g.mean.transpose();
  g.cov = c.transpose() * c / static_cast<double>(x.rows());
  return g;
}

int cmd_discrepancy(const CommonOptions& o) {
  const json cfg = load_config(o);
  std::vector<std::string> measures = {"mmd2", "proxy_a_distance"};
  if (cfg.contains("measures")) {
    require(cfg.at("measures").is_array(), "config.measures: expected an array");
    measures = cfg.at("measures").get<std::vector<std::string>>();
  }
  static const std::vector<std::string> known = {"mmd2", "mmd2_unbiased", "mmd_permutation", "renyi2",
                                                 "proxy_a_distance", "hellinger_hist"};
  for (const auto& m : measures) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw Error(ErrorCode::kInvalidArgument, "unknown measure '" + m + "'; known measures: " + list);
    }
  }
  std::optional<KernelSpec> kernel;
  if (cfg.contains("bandwidth")) kernel = KernelSpec::gaussian(number_from_json(cfg.at("bandwidth"), "config.bandwidth"));
  const int bins = cfg.value("bins", 32);
  std::optional<fs::path> weights_path;
  if (cfg.contains("weights")) {
    weights_path = fs::path(cfg.at("weights").get<std::string>());
    if (weights_path->is_relative()) weights_path = config_dir(o) / *weights_path;
  }
  Inputs in = load_inputs(o, cfg);
  const Matrix& x = in.data.source.features;
  const Matrix& z = in.data.target.features;
  std::optional<Vector> weights;
  if (weights_path) {
    weights = read_weights_csv(*weights_path);
    require(weights->size() == x.rows(), "weights CSV length differs from the source sample",
            ErrorCode::kDimensionMismatch);
  }
  RandomStream stream = in.stream.substream(1);

  json reports = json::array();
  std::vector<std::pair<std::string, json>> rows;
  for (const auto& m : measures) {
    json r;
    as_method(m, x.rows(), [&] {
      if (m == "mmd2" || m == "mmd2_unbiased") {
        r = mmd2(x, z, kernel, weights, m == "mmd2" ? MmdEstimator::kBiased : MmdEstimator::kUnbiased).to_json();
      } else if (m == "mmd_permutation") {
        const auto t = mmd_permutation_test(x, z, resolve_kernel(kernel, x, z), stream, cfg.value("permutations", 200));
        r = {{"measure", "mmd_permutation"}, {"value", t.p_value}, {"meta", {{"statistic", t.statistic}}}};
      } else if (m == "renyi2") {
        const bool from_scenario = in.source.scenario.has_value();
        const auto gt = from_scenario ? moment_match(in.source.scenario->scenario.target) : fit_gaussian(z);
        const auto gs = from_scenario ? moment_match(in.source.scenario->scenario.source) : fit_gaussian(x);
        r = renyi2_gaussian(gt, gs).to_json();
        r["meta"]["gaussians"] = from_scenario ? "moment-matched scenario domains" : "maximum-likelihood sample fits";
      } else if (m == "proxy_a_distance") {
        r = proxy_a_distance(x, z, stream).to_json();
      } else {
        r = hellinger_hist(x, z, bins).to_json();
      }
      return 0;
    });
    rows.emplace_back(m, r["value"]);
    reports.push_back(r);
  }
  write_report(o, {{"command", "discrepancy"}, {"seed", in.seed}, {"reports", reports}}, kv_csv(rows, "measure"));
  return kExitOk;
}

int cmd_bounds(const CommonOptions& o) {
  const json cfg = load_config(o);
  const double delta = cfg.contains("delta") ? number_from_json(cfg.at("delta"), "config.delta") : 0.05;
  const double complexity = cfg.contains("complexity") ? number_from_json(cfg.at("complexity"), "config.complexity") : 0.0;
  std::optional<double> hypotheses;
  if (cfg.contains("hypothesis_count")) hypotheses = number_from_json(cfg.at("hypothesis_count"), "config.hypothesis_count");
  Inputs in = load_inputs(o, cfg);
  require(in.source.scenario.has_value(), "bounds: config must describe a scenario");
  RandomStream stream = in.stream.substream(1);
  BoundInputs b = as_method("estimate_bound_terms", in.data.source.rows(), [&] {
    return estimate_bound_terms(in.source.scenario->scenario, in.data.source, in.data.target, stream, complexity, delta);
  });
  if (cfg.contains("pseudo_dimension")) b.pseudo_dimension = number_from_json(cfg.at("pseudo_dimension"), "config.pseudo_dimension");
  if (hypotheses) b.hypothesis_count = *hypotheses;

  std::vector<std::pair<std::string, json>> rows;
  if (hypotheses) rows.emplace_back("pac", pac_bound(*hypotheses, b.n, delta));
  rows.emplace_back("cortes_iw", json_number(cortes_iw_bound(b.d2_exponentiated, b.pseudo_dimension, b.n, delta)));
  rows.emplace_back("ben_david", ben_david_bound(b.joint_error, b.divergence, b.complexity));
  json bounds = json::object();
  for (const auto& [k, v] : rows) bounds[k] = v;
  write_report(o, {{"command", "bounds"}, {"seed", in.seed}, {"inputs", b.to_json()}, {"bounds", bounds}},
               kv_csv(rows, "bound"));
  return kExitOk;
}

int cmd_bench(const CommonOptions& o) {
  const json cfg = load_config(o);
  ExperimentConfig exp = experiment_from_json(cfg, config_dir(o));
  if (o.seed) exp.seed = *o.seed;
  spdlog::info("bench: {} methods x {} trials x {} sizes, {} thread(s)", exp.methods.size(), exp.trials,
               std::max<std::size_t>(exp.sizes.size(), 1), o.parallel);
  const BenchOutput out = run_bench(exp, o.parallel);
  for (const auto& a : out.report["aggregates"]) {
    const auto& metrics = a["metrics"];
    if (metrics.contains("target_risk")) {
      spdlog::info("n={} {}: target risk {:.4f} +- {:.4f}", a["n"].get<std::size_t>(), a["method"].get<std::string>(),
                   metrics["target_risk"]["mean"].get<double>(), metrics["target_risk"]["stddev"].get<double>());
    }
  }
  write_report(o, out.report, out.csv);
  return kExitOk;
}

int cmd_plotdata(const CommonOptions& o, std::string report_path, std::string kind) {
  if (!o.config.empty()) {
    const json cfg = load_config(o);
    if (report_path.empty() && cfg.contains("report")) {
      report_path = (config_dir(o) / cfg.at("report").get<std::string>()).string();
    }
    if (kind.empty() && cfg.contains("kind")) kind = cfg.at("kind").get<std::string>();
  }
  require(!report_path.empty() && !kind.empty(), "plotdata: need a report path and a kind (--report/--kind or config)");
  const json report = read_json_file(report_path);
  const std::string csv = plot_data_csv(report, kind);
  write_text_file(fs::path(o.out) / (kind + ".csv"), csv);
  spdlog::info("wrote {}/{}.csv", o.out, kind);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"shiftlab: domain-adaptation estimators, discrepancies, bounds and benchmarks"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string plot_report, plot_kind;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {{"generate", "Draw source/target samples from a scenario"},
                      {"weights", "Estimate importance weights"},
                      {"adapt", "Train an adapted classifier"},
                      {"discrepancy", "Measure domain discrepancy"},
                      {"bounds", "Estimate bound terms and evaluate bounds"},
                      {"bench", "Run a seeded multi-trial benchmark"},
                      {"plotdata", "Emit tidy CSV for a report series"}};
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", opts.config, "JSON config path");
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    sub->add_option("--parallel", opts.parallel, "Worker threads for trials")->check(CLI::Range(1u, 1024u));
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { opts.seed = v; },
                                            "Master seed (overrides config)");
    if (std::string(s.name) == "plotdata") {
      sub->add_option("--report", plot_report, "report.json path");
      sub->add_option("--kind", plot_kind, "weights-vs-true | risk-vs-n | bound-vs-gap");
    } else {
      sub->get_option("--config")->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "generate") return cmd_generate(opts);
    if (command == "weights") return cmd_weights(opts);
    if (command == "adapt") return cmd_adapt(opts);
    if (command == "discrepancy") return cmd_discrepancy(opts);
    if (command == "bounds") return cmd_bounds(opts);
    if (command == "bench") return cmd_bench(opts);
    return cmd_plotdata(opts, plot_report, plot_kind);
  } catch (const MethodFailure& e) {
    spdlog::error("{}", e.what());
    return kExitMethod;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    switch (e.code()) {
      case ErrorCode::kIo: return kExitIo;
      case ErrorCode::kNotConverged:
      case ErrorCode::kSingular: return kExitMethod;
      default: return kExitConfig;
    }
  } catch (const json::exception& e) {
    spdlog::error("config: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitMethod;
  }
}
