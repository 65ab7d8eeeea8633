#include "shiftlab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace shiftlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw Error(ErrorCode::kInvalidArgument, where + ": not a number '" + text + "'");
  return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string location(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

GaussianParams gaussian_from_json(const json& mean, const json& cov, const std::string& what) {
  GaussianParams g;
  g.mean = vector_from_json(mean, what + ".mean");
  g.cov = matrix_from_json(cov, what + ".cov");
  return g;
}

DomainSpec domain_from_json(const json& j, const std::string& what) {
  require(j.is_object(), what + ": expected an object");
  DomainSpec d;
  for (const char* key : {"priors", "means", "covs"}) require(j.contains(key), what + ": missing '" + key + "'");
  const Vector priors = vector_from_json(j.at("priors"), what + ".priors");
  require(priors.size() == 2, what + ".priors: expected two entries (p(y=-1), p(y=+1))");
  d.priors = {priors(0), priors(1)};
  require(j.at("means").is_array() && j.at("means").size() == 2, what + ".means: expected one mean per class");
  require(j.at("covs").is_array() && j.at("covs").size() == 2, what + ".covs: expected one covariance per class");
  for (std::size_t c = 0; c < 2; ++c) {
    d.conditionals.classes[c] = gaussian_from_json(j.at("means")[c], j.at("covs")[c], what + ".class" + std::to_string(c));
  }
  if (j.contains("posterior") && !j.at("posterior").is_null()) {
    const json& p = j.at("posterior");
    LogisticPosterior post;
    post.coef = vector_from_json(p.at("coef"), what + ".posterior.coef");
    post.intercept = number_from_json(p.value("intercept", json(0.0)), what + ".posterior.intercept");
    d.posterior = post;
  }
  return d;
}

json domain_to_json(const DomainSpec& d) {
  json j;
  j["priors"] = {d.priors[0], d.priors[1]};
  j["means"] = json::array();
  j["covs"] = json::array();
  for (const auto& g : d.conditionals.classes) {
    j["means"].push_back(vector_to_json(g.mean));
    j["covs"].push_back(matrix_to_json(g.cov));
  }
  if (d.posterior) j["posterior"] = {{"coef", vector_to_json(d.posterior->coef)}, {"intercept", d.posterior->intercept}};
  return j;
}

std::size_t size_from_json(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  require(v.is_number_integer() || v.is_number_unsigned(), std::string("scenario.") + key + ": expected an integer");
  require(v.get<long long>() >= 1, std::string("scenario.") + key + ": must be >= 1");
  return v.get<std::size_t>();
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset_csv(const fs::path& path, const Dataset& data) {
  validate_or_throw(data);
  std::string out;
  for (std::size_t c = 0; c < data.dim(); ++c) out += (c ? ",f" : "f") + std::to_string(c);
  if (data.labeled()) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t c = 0; c < data.dim(); ++c) {
      if (c) out += ',';
      out += format_double(data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    if (data.labeled()) out += data.y()[i] > 0 ? ",1" : ",-1";
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset read_dataset_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  require(!lines.empty(), path.string() + ": empty file");
  const auto header = split_csv_line(lines[0]);
  std::size_t dim = 0;
  while (dim < header.size() && header[dim] == "f" + std::to_string(dim)) ++dim;
  const bool labeled = dim + 1 == header.size() && header[dim] == "label";
  require(dim >= 1 && (dim == header.size() || labeled),
          location(path, 1) + ": header must be f0,...,f{D-1}[,label]");
  require(lines.size() >= 2, path.string() + ": no data rows");

  const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
  Matrix x(rows, static_cast<Eigen::Index>(dim));
  std::vector<int> y;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    require(cells.size() == header.size(), location(path, r + 1) + ": expected " + std::to_string(header.size()) + " fields");
    for (std::size_t c = 0; c < dim; ++c) {
      x(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = parse_double(cells[c], location(path, r + 1));
    }
    if (labeled) {
      const double v = parse_double(cells[dim], location(path, r + 1));
      require(v == 1.0 || v == -1.0, location(path, r + 1) + ": label must be -1 or 1");
      y.push_back(v > 0 ? 1 : -1);
    }
  }
  Dataset d = labeled ? Dataset(std::move(x), std::move(y)) : Dataset(std::move(x));
  validate_or_throw(d, path.string());
  return d;
}

void write_weights_csv(const fs::path& path, const Vector& weights) {
  std::string out = "weight\n";
  for (Eigen::Index i = 0; i < weights.size(); ++i) out += format_double(weights(i)) + '\n';
  write_text_file(path, out);
}

Vector read_weights_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  require(!lines.empty() && lines[0] == "weight", location(path, 1) + ": header must be 'weight'");
  Vector w(static_cast<Eigen::Index>(lines.size() - 1));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    w(static_cast<Eigen::Index>(r - 1)) = parse_double(lines[r], location(path, r + 1));
    require(std::isfinite(w(static_cast<Eigen::Index>(r - 1))) && w(static_cast<Eigen::Index>(r - 1)) >= 0.0,
            location(path, r + 1) + ": weights must be finite and nonnegative");
  }
  return w;
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument,
                origin + ": malformed JSON at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

json read_json_file(const fs::path& path) { return parse_json(read_text_file(path), path.string()); }

json json_number(double value) {
  if (std::isnan(value)) return nullptr;
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

double number_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error(ErrorCode::kInvalidArgument, what + ": expected a number");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(json_number(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), what + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  require(cols >= 1, what + ": expected a nonempty array of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].is_array() && j[r].size() == cols, what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number_from_json(j[r][c], what);
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
  return a;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  require(j.is_array() && !j.empty(), what + ": expected a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from_json(j[i], what);
  return v;
}

json model_to_json(const LinearModel& model) {
  return {{"coef", vector_to_json(model.coef)},
          {"intercept", json_number(model.intercept)},
          {"loss", to_string(model.loss)},
          {"lambda", json_number(model.lambda)}};
}

LinearModel model_from_json(const json& j) {
  require(j.is_object(), "model: expected an object");
  for (const char* key : {"coef", "intercept", "loss", "lambda"}) require(j.contains(key), std::string("model: missing '") + key + "'");
  LinearModel m;
  m.coef = vector_from_json(j.at("coef"), "model.coef");
  m.intercept = number_from_json(j.at("intercept"), "model.intercept");
  m.loss = loss_from_string(j.at("loss").get<std::string>());
  m.lambda = number_from_json(j.at("lambda"), "model.lambda");
  return m;
}

json projection_to_json(const Projection& p) {
  json j;
  j["basis"] = matrix_to_json(p.basis);
  j["eigenvalues"] = vector_to_json(p.eigenvalues);
  if (p.alignment) j["alignment"] = matrix_to_json(*p.alignment);
  if (p.target_basis) j["target_basis"] = matrix_to_json(*p.target_basis);
  j["source_mean"] = vector_to_json(p.source_mean);
  j["target_mean"] = vector_to_json(p.target_mean);
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  require(j.is_object(), "scenario: expected an object");
  require(j.contains("kind") && j.at("kind").is_string(), "scenario: missing string field 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  ScenarioConfig out;
  out.n = size_from_json(j, "n", out.n);
  out.m = size_from_json(j, "m", out.m);
  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0),
            "scenario.seed: expected a nonnegative integer");
    out.seed = j.at("seed").get<std::uint64_t>();
  }
  if (kind == "covariate_1d") {
    const double sigma = number_from_json(j.value("sigma_T", json(1.5)), "scenario.sigma_T");
    out.scenario = make_covariate_shift_1d(sigma);
  } else if (kind == "concept_1d") {
    out.scenario = make_concept_shift_1d(number_from_json(j.value("source_offset", json(0.0)), "scenario.source_offset"),
                                         number_from_json(j.value("target_offset", json(1.0)), "scenario.target_offset"),
                                         number_from_json(j.value("slope", json(2.0)), "scenario.slope"));
  } else {
    out.scenario.kind = shift_kind_from_string(kind);
    require(j.contains("source") && j.contains("target"), "scenario: 'source' and 'target' domains required");
    out.scenario.source = domain_from_json(j.at("source"), "scenario.source");
    out.scenario.target = domain_from_json(j.at("target"), "scenario.target");
  }
  out.scenario.check();
  out.description = j;
  out.description["n"] = out.n;
  out.description["m"] = out.m;
  out.description["seed"] = out.seed;
  return out;
}

json scenario_to_json(const ShiftScenario& scenario) {
  return {{"kind", to_string(scenario.kind)},
          {"source", domain_to_json(scenario.source)},
          {"target", domain_to_json(scenario.target)}};
}

}  // namespace shiftlab
