#include "shiftlab/bench.hpp"
#include "shiftlab/io.hpp"
#include "shiftlab/subspace.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace shiftlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shiftlab_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SHIFTLAB_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

json small_bench_config(std::size_t trials) {
  json c = json::parse(R"({"scenario": {"kind": "covariate_1d", "sigma_T": 1.5, "n": 150, "m": 150},
                           "methods": ["kmm", "unweighted"], "seed": 42})");
  c["trials"] = trials;
  return c;
}

TEST(DatasetCsv, RoundTripIsExact) {
  RandomStream rs(1);
  Dataset d(rs.normal_matrix(20, 3) * 1e3, std::vector<int>(20, 1));
  (*d.labels)[3] = -1;
  const fs::path p = scratch("csv") / "d.csv";
  write_dataset_csv(p, d);
  EXPECT_EQ(slurp(p).substr(0, 15), "f0,f1,f2,label\n");
  const Dataset back = read_dataset_csv(p);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.y(), d.y());
}

TEST(DatasetCsv, UnlabeledAndMalformed) {
  const fs::path dir = scratch("csv2");
  write_text_file(dir / "u.csv", "f0,f1\n1,2\n3.5,-4e-3\n");
  const Dataset u = read_dataset_csv(dir / "u.csv");
  EXPECT_FALSE(u.labeled());
  EXPECT_DOUBLE_EQ(u.features(1, 1), -4e-3);
  write_text_file(dir / "h.csv", "x,y\n1,2\n");
  EXPECT_THROW(read_dataset_csv(dir / "h.csv"), Error);
  write_text_file(dir / "l.csv", "f0,label\n1,0\n");
  EXPECT_THROW(read_dataset_csv(dir / "l.csv"), Error);
  write_text_file(dir / "n.csv", "f0\nabc\n");
  EXPECT_THROW(read_dataset_csv(dir / "n.csv"), Error);
  try {
    read_dataset_csv(dir / "missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(WeightsCsv, RoundTripAndHeader) {
  const fs::path dir = scratch("w");
  const Vector w = (Vector(3) << 0.0, 1.0 / 3.0, 7.25).finished();
  write_weights_csv(dir / "w.csv", w);
  EXPECT_EQ(slurp(dir / "w.csv").substr(0, 7), "weight\n");
  EXPECT_EQ(read_weights_csv(dir / "w.csv"), w);
  write_text_file(dir / "bad.csv", "weight\n-1\n");
  EXPECT_THROW(read_weights_csv(dir / "bad.csv"), Error);
}

TEST(Json, ModelRoundTrip) {
  LinearModel m;
  m.coef = (Vector(2) << 0.1, -2.5).finished();
  m.intercept = 0.3;
  m.loss = LossKind::kHinge;
  m.lambda = 0.01;
  const json j = model_to_json(m);
  for (const char* key : {"coef", "intercept", "loss", "lambda"}) EXPECT_TRUE(j.contains(key));
  const LinearModel back = model_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.coef, m.coef);
  EXPECT_EQ(back.intercept, m.intercept);
  EXPECT_EQ(back.loss, m.loss);
  EXPECT_EQ(back.lambda, m.lambda);
}

TEST(Json, ProjectionIsRowMajor) {
  Matrix x(4, 2);
  x << 1, 1, -1, -1, 2, 2.1, -2, -2.1;
  const json j = projection_to_json(pca(x, 1));
  ASSERT_EQ(j["basis"].size(), 2u);
  EXPECT_EQ(j["basis"][0].size(), 1u);
}

TEST(Json, InfinityAndByteOffset) {
  EXPECT_EQ(json_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_TRUE(std::isinf(number_from_json(json("inf"), "x")));
  EXPECT_TRUE(json_number(std::nan("")).is_null());
  try {
    parse_json(R"({"a": 1,, })", "cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 9"), std::string::npos) << e.what();
  }
}

TEST(Json, ScenarioForms) {
  const auto c = scenario_from_json(json::parse(R"({"kind": "covariate_1d", "sigma_T": 2.0, "n": 10, "m": 20, "seed": 3})"));
  EXPECT_EQ(c.n, 10u);
  EXPECT_EQ(c.m, 20u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_DOUBLE_EQ(c.scenario.target.conditionals.classes[0].cov(0, 0), 4.0);

  const auto p = scenario_from_json(json::parse(R"({"kind": "prior",
      "source": {"priors": [0.5, 0.5], "means": [[-1, 0], [1, 0]], "covs": [[[1, 0.5], [0.5, 2]], [[1, 0.5], [0.5, 2]]]},
      "target": {"priors": [0.75, 0.25], "means": [[-1, 0], [1, 0]], "covs": [[[1, 0.5], [0.5, 2]], [[1, 0.5], [0.5, 2]]]}})"));
  EXPECT_EQ(p.scenario.kind, ShiftKind::kPrior);
  EXPECT_DOUBLE_EQ(p.scenario.source.conditionals.classes[1].cov(1, 1), 2.0);
  EXPECT_DOUBLE_EQ(p.scenario.target.priors[0], 0.75);
  const json back = scenario_to_json(p.scenario);
  EXPECT_EQ(scenario_from_json(back).scenario.target.conditionals.classes[0].mean, p.scenario.target.conditionals.classes[0].mean);

  EXPECT_THROW(scenario_from_json(json::parse(R"({"kind": "sideways"})")), Error);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"kind": "covariate_1d", "sigma_T": 0})")), Error);
  // Prior kind with differing conditionals violates the kind invariant.
  EXPECT_THROW(scenario_from_json(json::parse(R"({"kind": "prior",
      "source": {"priors": [0.5, 0.5], "means": [-1, 1], "covs": [[[1]], [[1]]]},
      "target": {"priors": [0.5, 0.5], "means": [-1, 2], "covs": [[[1]], [[1]]]}})")),
               Error);
}

TEST(Config, UnknownMethodListsRegistry) {
  try {
    method_from_json("kmn");
    FAIL();
  } catch (const Error& e) {
    const std::string what = e.what();
    for (const auto& name : registered_methods()) EXPECT_NE(what.find(name), std::string::npos) << name;
  }
  EXPECT_THROW(method_from_json(json::parse(R"({"name": "kmm", "bandwdith": 1})")), Error);
  EXPECT_EQ(method_from_json(json::parse(R"({"name": "kmm", "bandwidth": 1})")).params["bandwidth"], 1);
}

TEST(Config, Validation) {
  json c = small_bench_config(0);
  EXPECT_THROW(experiment_from_json(c, "."), Error);
  c = small_bench_config(1);
  c["methods"] = json::array();
  EXPECT_THROW(experiment_from_json(c, "."), Error);
  c = small_bench_config(1);
  c["colour"] = "blue";
  EXPECT_THROW(experiment_from_json(c, "."), Error);
  c = small_bench_config(1);
  c["loss"] = "zero_one";
  EXPECT_THROW(experiment_from_json(c, "."), Error);
}

TEST(Bench, ExampleConfigShapeAndDeterminism) {
  const auto cfg = experiment_from_json(small_bench_config(20), ".");
  const auto a = run_bench(cfg, 1);
  const auto b = run_bench(cfg, 1);
  const auto c = run_bench(cfg, 3);
  EXPECT_EQ(a.report["trials"].size(), 40u);
  EXPECT_EQ(deterministic_sections(a.report).dump(), deterministic_sections(b.report).dump());
  EXPECT_EQ(deterministic_sections(a.report).dump(), deterministic_sections(c.report).dump());
  EXPECT_EQ(a.csv, c.csv);
  EXPECT_TRUE(a.report.contains("timings"));
  EXPECT_FALSE(deterministic_sections(a.report).contains("timings"));
}

TEST(Bench, AggregatesRecomputable) {
  const auto out = run_bench(experiment_from_json(small_bench_config(4), "."), 1);
  const json again = aggregate_trials(out.report["trials"]);
  ASSERT_EQ(again.size(), out.report["aggregates"].size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    for (const auto& [metric, v] : again[i]["metrics"].items()) {
      const auto& w = out.report["aggregates"][i]["metrics"][metric];
      EXPECT_NEAR(v["mean"].get<double>(), w["mean"].get<double>(), 1e-12);
      EXPECT_NEAR(v["stddev"].get<double>(), w["stddev"].get<double>(), 1e-12);
    }
  }
  // Direct check of one mean.
  double sum = 0.0;
  int count = 0;
  for (const auto& r : out.report["trials"]) {
    if (r["method"] == "kmm") {
      sum += r["target_risk"].get<double>();
      ++count;
    }
  }
  EXPECT_NEAR(out.report["aggregates"][0]["metrics"]["target_risk"]["mean"].get<double>(), sum / count, 1e-12);
}

TEST(Bench, MethodsNeverSeeTargetLabels) {
  RandomStream rs(2);
  auto s = gen_covariate_shift_1d(1.5, 50, 50, rs);
  const MethodInput leaky{s.source, s.target};
  EXPECT_THROW(run_method(MethodSpec{"unweighted"}, leaky, rs), Error);
  const Dataset hidden = s.target.unlabeled();
  const MethodInput ok{s.source, hidden};
  EXPECT_EQ(run_method(MethodSpec{"unweighted"}, ok, rs).target_predictions.size(), 50u);
}

TEST(Bench, EveryRegisteredMethodRuns) {
  json c = json::parse(R"({"scenario": {"kind": "covariate_1d", "sigma_T": 1.3, "n": 80, "m": 80}, "trials": 1, "seed": 1})");
  c["methods"] = registered_methods();
  c["methods"].erase(std::find(c["methods"].begin(), c["methods"].end(), "class_weights"));
  const auto out = run_bench(experiment_from_json(c, "."), 1);
  EXPECT_EQ(out.report["trials"].size(), registered_methods().size() - 1);
  // Prior-shift scenario for the class-weight oracle.
  json p = json::parse(R"({"scenario": {"kind": "prior", "n": 80, "m": 80,
      "source": {"priors": [0.5, 0.5], "means": [-1, 1], "covs": [[[1]], [[1]]]},
      "target": {"priors": [0.75, 0.25], "means": [-1, 1], "covs": [[[1]], [[1]]]}},
      "methods": ["class_weights"], "trials": 1})");
  EXPECT_EQ(run_bench(experiment_from_json(p, "."), 1).report["trials"].size(), 1u);
}

TEST(Bench, MethodFailureNamesMethodAndTrial) {
  const fs::path dir = scratch("fail");
  RandomStream rs(3);
  auto s = gen_covariate_shift_1d(1.5, 30, 30, rs);
  write_dataset_csv(dir / "s.csv", s.source);
  write_dataset_csv(dir / "t.csv", s.target);
  json c = {{"data", {{"source", "s.csv"}, {"target", "t.csv"}}}, {"methods", {"true_weights"}}};
  try {
    run_bench(experiment_from_json(c, dir), 1);
    FAIL();
  } catch (const MethodFailure& e) {
    EXPECT_EQ(e.method(), "true_weights");
    EXPECT_EQ(e.trial(), 0u);
  }
}

TEST(PlotData, SchemasAndMissingSeries) {
  json c = small_bench_config(2);
  c["sizes"] = {60, 120};
  c["methods"] = {"kliep", "unweighted"};
  const auto out = run_bench(experiment_from_json(c, "."), 1);
  const std::string w = plot_data_csv(out.report, "weights-vs-true");
  EXPECT_EQ(w.substr(0, w.find('\n')), "x,true_weight,estimated_weight,method");
  const std::string r = plot_data_csv(out.report, "risk-vs-n");
  EXPECT_EQ(r.substr(0, r.find('\n')), "n,method,trial,target_risk");
  EXPECT_EQ(std::count(r.begin(), r.end(), '\n'), 1 + 2 * 2 * 2);  // sizes x trials x methods
  const std::string g = plot_data_csv(out.report, "bound-vs-gap");
  EXPECT_EQ(g.substr(0, g.find('\n')), "n,method,trial,bound_kind,bound,gap");
  EXPECT_THROW(plot_data_csv(json::object(), "risk-vs-n"), Error);
  EXPECT_THROW(plot_data_csv(out.report, "histogram"), Error);
}

TEST(Cli, ExitCodesAndOutputs) {
  const fs::path dir = scratch("exit");
  const fs::path log = dir / "log.txt";
  write_text_file(dir / "ok.json", small_bench_config(2).dump());
  EXPECT_EQ(run_cli("bench --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string(), log), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));

  write_text_file(dir / "bad.json", R"({"methods": [,]})");
  EXPECT_EQ(run_cli("bench --config " + (dir / "bad.json").string(), log), 2);
  EXPECT_NE(slurp(log).find("byte offset"), std::string::npos);

  json typo = small_bench_config(1);
  typo["methods"] = {"kmn"};
  write_text_file(dir / "typo.json", typo.dump());
  EXPECT_EQ(run_cli("bench --config " + (dir / "typo.json").string(), log), 2);
  EXPECT_NE(slurp(log).find("registered methods: unweighted"), std::string::npos);

  EXPECT_EQ(run_cli("bench --config " + (dir / "nope.json").string(), log), 4);
  EXPECT_EQ(run_cli("bench --config " + (dir / "ok.json").string() + " --out /proc/shiftlab_denied", log), 4);

  RandomStream rs(4);
  auto s = gen_covariate_shift_1d(1.5, 30, 30, rs);
  write_dataset_csv(dir / "s.csv", s.source);
  write_dataset_csv(dir / "t.csv", s.target);
  write_text_file(dir / "oracle.json", R"({"data": {"source": "s.csv", "target": "t.csv"}, "methods": ["true_weights"]})");
  EXPECT_EQ(run_cli("bench --config " + (dir / "oracle.json").string() + " --out " + (dir / "o").string(), log), 3);
  EXPECT_NE(slurp(log).find("true_weights"), std::string::npos);

  EXPECT_EQ(run_cli("bench", log), 2);
}

TEST(Cli, SeedFlagOverridesAndParallelMatches) {
  const fs::path dir = scratch("seed");
  const fs::path log = dir / "log.txt";
  write_text_file(dir / "c.json", small_bench_config(3).dump());
  const std::string base = "bench --config " + (dir / "c.json").string();
  ASSERT_EQ(run_cli(base + " --out " + (dir / "a").string(), log), 0);
  ASSERT_EQ(run_cli(base + " --parallel 2 --out " + (dir / "b").string(), log), 0);
  ASSERT_EQ(run_cli(base + " --seed 7 --out " + (dir / "c").string(), log), 0);
  EXPECT_EQ(slurp(dir / "a" / "report.csv"), slurp(dir / "b" / "report.csv"));
  EXPECT_NE(slurp(dir / "a" / "report.csv"), slurp(dir / "c" / "report.csv"));
  const json ja = deterministic_sections(read_json_file(dir / "a" / "report.json"));
  const json jb = deterministic_sections(read_json_file(dir / "b" / "report.json"));
  EXPECT_EQ(ja, jb);
}

TEST(Cli, SubcommandsWriteTheirArtifacts) {
  const fs::path dir = scratch("subs");
  const fs::path log = dir / "log.txt";
  write_text_file(dir / "gen.json", R"({"scenario": {"kind": "covariate_1d", "sigma_T": 1.5, "n": 60, "m": 60, "seed": 5}})");
  ASSERT_EQ(run_cli("generate --config " + (dir / "gen.json").string() + " --out " + (dir / "g").string(), log), 0);
  const Dataset src = read_dataset_csv(dir / "g" / "source.csv");
  EXPECT_EQ(src.rows(), 60u);

  write_text_file(dir / "w.json", R"({"data": {"source": "g/source.csv", "target": "g/target.csv"}, "method": "lsif"})");
  ASSERT_EQ(run_cli("weights --config " + (dir / "w.json").string() + " --out " + (dir / "w").string(), log), 0);
  EXPECT_EQ(read_weights_csv(dir / "w" / "weights.csv").size(), 60);

  write_text_file(dir / "a.json", R"({"data": {"source": "g/source.csv", "target": "g/target.csv"}, "method": "unweighted"})");
  ASSERT_EQ(run_cli("adapt --config " + (dir / "a.json").string() + " --out " + (dir / "a").string(), log), 0);
  EXPECT_NO_THROW(model_from_json(read_json_file(dir / "a" / "model.json")));

  write_text_file(dir / "d.json", R"({"data": {"source": "g/source.csv", "target": "g/target.csv"}, "measures": ["mmd2", "renyi2"]})");
  ASSERT_EQ(run_cli("discrepancy --config " + (dir / "d.json").string() + " --out " + (dir / "d").string(), log), 0);
  EXPECT_EQ(read_json_file(dir / "d" / "report.json")["reports"].size(), 2u);

  write_text_file(dir / "b.json", R"({"scenario": {"kind": "covariate_1d", "sigma_T": 1.2, "n": 100, "m": 100}})");
  ASSERT_EQ(run_cli("bounds --config " + (dir / "b.json").string() + " --out " + (dir / "b").string(), log), 0);
  EXPECT_TRUE(read_json_file(dir / "b" / "report.json")["bounds"].contains("ben_david"));

  write_text_file(dir / "bench.json", small_bench_config(1).dump());
  ASSERT_EQ(run_cli("bench --config " + (dir / "bench.json").string() + " --out " + (dir / "r").string(), log), 0);
  ASSERT_EQ(run_cli("plotdata --report " + (dir / "r" / "report.json").string() + " --kind risk-vs-n --out " +
                        (dir / "p").string(),
                    log),
            0);
  EXPECT_TRUE(fs::exists(dir / "p" / "risk-vs-n.csv"));
}

}  // namespace
}  // namespace shiftlab
