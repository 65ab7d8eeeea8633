#include "shiftlab/scenarios.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace shiftlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log_sum_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double log_mixture(const DomainSpec& d, const Eigen::Ref<const Vector>& x) {
  double acc = -INFINITY;
  for (std::size_t c = 0; c < 2; ++c) {
    if (d.priors[c] <= 0.0) continue;
    acc = log_sum_exp(acc, std::log(d.priors[c]) + d.conditionals.classes[c].log_density(x));
  }
  return acc;
}

void check_priors(const PriorPair& p, const char* which) {
  require(p[0] >= 0.0 && p[1] >= 0.0 && std::abs(p[0] + p[1] - 1.0) <= 1e-12,
          std::string("invalid ") + which + " priors: must be nonnegative and sum to 1");
}

bool same_gaussian(const GaussianParams& a, const GaussianParams& b) {
  return a.mean.size() == b.mean.size() && a.mean == b.mean && a.cov == b.cov;
}

bool same_conditionals(const GaussianClassConditional& a, const GaussianClassConditional& b) {
  return same_gaussian(a.classes[0], b.classes[0]) && same_gaussian(a.classes[1], b.classes[1]);
}

/// Deterministic probe points: axis-aligned sweeps through the pooled class means.
std::vector<Vector> probe_grid(const ShiftScenario& s, std::size_t count) {
  const auto dim = static_cast<Eigen::Index>(s.dim());
  Vector centre = Vector::Zero(dim);
  for (const auto* d : {&s.source, &s.target})
    for (const auto& g : d->conditionals.classes) centre += g.mean / 4.0;
  std::vector<Vector> pts;
  const std::size_t per_axis = std::max<std::size_t>(2, count / static_cast<std::size_t>(dim));
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < per_axis; ++i) {
      Vector p = centre;
      p(k) += -4.0 + 8.0 * static_cast<double>(i) / static_cast<double>(per_axis - 1);
      pts.push_back(p);
    }
  }
  return pts;
}

/// Breakpoints for piecewise adaptive quadrature along one axis.
std::vector<double> breakpoints(const std::vector<std::pair<double, double>>& mean_sd, double extra) {
  std::vector<double> pts;
  for (auto [mu, sd] : mean_sd)
    for (int k = -12; k <= 12; k += 2) pts.push_back(mu + k * sd);
  if (std::isfinite(extra)) pts.push_back(extra);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

/// Log-odds log p(x,+)/p(x,-); NaN when a class has zero prior.
double log_odds(const DomainSpec& d, const Vector& x) {
  if (d.posterior) return d.posterior->coef.dot(x) + d.posterior->intercept;
  if (d.priors[0] <= 0.0 || d.priors[1] <= 0.0) return NAN;
  const auto& c = d.conditionals.classes;
  return std::log(d.priors[1]) + c[1].log_density(x) - std::log(d.priors[0]) - c[0].log_density(x);
}

/// Points t where the log-odds along base + t dir changes sign. The log-odds
/// is at most quadratic in t, so three samples determine it.
std::vector<double> boundary_crossings(const DomainSpec& d, const Vector& base, const Vector& dir) {
  const double gm = log_odds(d, base - dir), g0 = log_odds(d, base), gp = log_odds(d, base + dir);
  if (!std::isfinite(gm) || !std::isfinite(g0) || !std::isfinite(gp)) return {};
  const double a = 0.5 * (gp + gm) - g0, b = 0.5 * (gp - gm), c = g0;
  const double scale = std::abs(a) + std::abs(b) + std::abs(c);
  if (std::abs(a) <= 1e-12 * scale) {
    if (std::abs(b) <= 1e-12 * scale) return {};
    return {-c / b};
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return {};
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> roots{q / a};
  if (q != 0.0) roots.push_back(c / q);
  return roots;
}

std::vector<double> with_points(std::vector<double> pts, const std::vector<double>& extra) {
  const double lo = pts.front(), hi = pts.back();
  for (double t : extra)
    if (t > lo && t < hi) pts.push_back(t);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

template <class F>
double integrate_pieces(F&& f, const std::vector<double>& pts, double tol, double* err_out) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0, err_total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    total += gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 15, tol, &err);
    err_total += err;
  }
  if (err_out) *err_out = err_total;
  return total;
}

std::vector<std::pair<double, double>> axis_moments(const DomainSpec& d, Eigen::Index axis) {
  std::vector<std::pair<double, double>> out;
  for (const auto& g : d.conditionals.classes) out.emplace_back(g.mean(axis), std::sqrt(g.cov(axis, axis)));
  return out;
}

}  // namespace

void GaussianParams::check() const {
  require(mean.size() >= 1 && cov.rows() == mean.size() && cov.cols() == mean.size(),
          "gaussian: covariance shape does not match mean", ErrorCode::kDimensionMismatch);
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "gaussian: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0.0, "gaussian: covariance is singular or indefinite", ErrorCode::kSingular);
}

double GaussianParams::log_density(const Eigen::Ref<const Vector>& x) const {
  Eigen::LLT<Matrix> llt(cov);
  require(llt.info() == Eigen::Success, "gaussian: covariance not positive definite", ErrorCode::kSingular);
  const Vector z = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det + z.squaredNorm());
}

void GaussianClassConditional::check() const {
  classes[0].check();
  classes[1].check();
  require(classes[0].mean.size() == classes[1].mean.size(), "class-conditionals differ in dimension",
          ErrorCode::kDimensionMismatch);
}

double LogisticPosterior::prob_positive(const Eigen::Ref<const Vector>& x) const {
  return sigmoid(coef.dot(x) + intercept);
}

double DomainSpec::density(const Eigen::Ref<const Vector>& x) const { return std::exp(log_mixture(*this, x)); }

double DomainSpec::prob_positive(const Eigen::Ref<const Vector>& x) const {
  if (posterior) return posterior->prob_positive(x);
  const auto& c = conditionals.classes;
  const double lp = priors[1] > 0 ? std::log(priors[1]) + c[1].log_density(x) : -INFINITY;
  const double ln = priors[0] > 0 ? std::log(priors[0]) + c[0].log_density(x) : -INFINITY;
  if (lp == -INFINITY) return 0.0;
  if (ln == -INFINITY) return 1.0;
  return sigmoid(lp - ln);
}

void DomainSpec::check() const {
  check_priors(priors, "domain");
  conditionals.check();
  if (posterior)
    require(posterior->coef.size() == static_cast<Eigen::Index>(conditionals.dim()),
            "logistic posterior dimension mismatch", ErrorCode::kDimensionMismatch);
}

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kPrior: return "prior";
    case ShiftKind::kCovariate: return "covariate";
    case ShiftKind::kConcept: return "concept";
    case ShiftKind::kGeneral: return "general";
  }
  return "general";
}

ShiftKind shift_kind_from_string(const std::string& name) {
  if (name == "prior") return ShiftKind::kPrior;
  if (name == "covariate") return ShiftKind::kCovariate;
  if (name == "concept") return ShiftKind::kConcept;
  if (name == "general") return ShiftKind::kGeneral;
  throw Error(ErrorCode::kInvalidArgument, "unknown scenario kind '" + name + "'");
}

void ShiftScenario::check() const {
  source.check();
  target.check();
  require(source.conditionals.dim() == target.conditionals.dim(), "scenario: domains differ in dimension",
          ErrorCode::kDimensionMismatch);
  switch (kind) {
    case ShiftKind::kPrior:
      require(same_conditionals(source.conditionals, target.conditionals) && !source.posterior && !target.posterior,
              "prior-shift scenario requires identical class-conditionals");
      break;
    case ShiftKind::kCovariate:
      for (const auto& x : probe_grid(*this, 100))
        require(std::abs(source.prob_positive(x) - target.prob_positive(x)) <= 1e-10,
                "covariate-shift scenario requires identical posteriors");
      break;
    case ShiftKind::kConcept:
      for (const auto& x : probe_grid(*this, 100)) {
        const double ps = source.density(x), pt = target.density(x);
        require(std::abs(ps - pt) <= 1e-10 * std::max(1.0, ps), "concept-shift scenario requires identical marginals");
      }
      break;
    case ShiftKind::kGeneral: break;
  }
}

Dataset sample_domain(const DomainSpec& domain, std::size_t n, RandomStream& stream) {
  domain.check();
  const auto dim = static_cast<Eigen::Index>(domain.conditionals.dim());
  std::array<Matrix, 2> chol;
  for (std::size_t c = 0; c < 2; ++c)
    chol[c] = Eigen::LLT<Matrix>(domain.conditionals.classes[c].cov).matrixL().toDenseMatrix();

  Matrix x(static_cast<Eigen::Index>(n), dim);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = stream.bernoulli(domain.priors[1]) ? 1 : 0;
    Vector z(dim);
    for (Eigen::Index k = 0; k < dim; ++k) z(k) = stream.normal();
    const Vector row = domain.conditionals.classes[c].mean + chol[c] * z;
    x.row(static_cast<Eigen::Index>(i)) = row.transpose();
    if (domain.posterior) {
      y[i] = stream.bernoulli(domain.posterior->prob_positive(row)) ? 1 : -1;
    } else {
      y[i] = c == 1 ? 1 : -1;
    }
  }
  return Dataset(std::move(x), std::move(y));
}

DomainSample sample_scenario(const ShiftScenario& scenario, std::size_t n, std::size_t m, RandomStream& stream) {
  auto s = stream.substream(0);
  auto t = stream.substream(1);
  return {sample_domain(scenario.source, n, s), sample_domain(scenario.target, m, t)};
}

ShiftScenario make_prior_shift(const PriorPair& priors_source, const PriorPair& priors_target,
                               const GaussianClassConditional& conditionals) {
  check_priors(priors_source, "source");
  check_priors(priors_target, "target");
  ShiftScenario s;
  s.kind = ShiftKind::kPrior;
  s.source = {priors_source, conditionals, std::nullopt};
  s.target = {priors_target, conditionals, std::nullopt};
  s.check();
  return s;
}

DomainSample gen_prior_shift(const PriorPair& priors_source, const PriorPair& priors_target,
                             const GaussianClassConditional& conditionals, std::size_t n, std::size_t m,
                             RandomStream& stream) {
  return sample_scenario(make_prior_shift(priors_source, priors_target, conditionals), n, m, stream);
}

LogisticPosterior covariate_1d_posterior() {
  LogisticPosterior p;
  p.coef = Vector::Constant(1, 2.0);
  p.intercept = 0.0;
  return p;
}

namespace {

DomainSpec logistic_1d_domain(double variance, const LogisticPosterior& posterior) {
  GaussianParams g{Vector::Zero(1), Matrix::Constant(1, 1, variance)};
  DomainSpec d;
  d.priors = {0.5, 0.5};
  d.conditionals.classes = {g, g};
  d.posterior = posterior;
  return d;
}

}  // namespace

ShiftScenario make_covariate_shift_1d(double sigma_t) {
  require(sigma_t > 0.0 && std::isfinite(sigma_t), "covariate shift: sigma_T must be positive");
  ShiftScenario s;
  s.kind = ShiftKind::kCovariate;
  s.source = logistic_1d_domain(1.0, covariate_1d_posterior());
  s.target = logistic_1d_domain(sigma_t * sigma_t, covariate_1d_posterior());
  return s;
}

DomainSample gen_covariate_shift_1d(double sigma_t, std::size_t n, std::size_t m, RandomStream& stream) {
  return sample_scenario(make_covariate_shift_1d(sigma_t), n, m, stream);
}

ShiftScenario make_concept_shift_1d(double source_offset, double target_offset, double slope) {
  LogisticPosterior ps{Vector::Constant(1, slope), source_offset};
  LogisticPosterior pt{Vector::Constant(1, slope), target_offset};
  ShiftScenario s;
  s.kind = ShiftKind::kConcept;
  s.source = logistic_1d_domain(1.0, ps);
  s.target = logistic_1d_domain(1.0, pt);
  s.check();
  return s;
}

Vector true_importance_weights(const ShiftScenario& scenario, const Matrix& points) {
  scenario.source.conditionals.check();
  scenario.target.conditionals.check();
  require(points.cols() == static_cast<Eigen::Index>(scenario.dim()), "true_importance_weights: dimension mismatch",
          ErrorCode::kDimensionMismatch);
  Vector w(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vector x = points.row(i).transpose();
    w(i) = std::exp(log_mixture(scenario.target, x) - log_mixture(scenario.source, x));
  }
  return w;
}

PriorPair true_class_weights(const ShiftScenario& scenario) {
  require(scenario.kind == ShiftKind::kPrior, "true_class_weights: scenario is not a prior shift");
  const auto& ps = scenario.source.priors;
  const auto& pt = scenario.target.priors;
  require(ps[0] > 0.0 && ps[1] > 0.0, "true_class_weights: zero source prior");
  return {pt[0] / ps[0], pt[1] / ps[1]};
}

BayesErrorResult bayes_error(const DomainSpec& domain, RandomStream* stream, std::size_t mc_samples) {
  domain.check();
  const auto dim = domain.conditionals.dim();
  constexpr double kTol = 1e-5;

  // Joint-density form of min(p(x,+), p(x,-)).
  auto pointwise = [&](const Vector& x) {
    if (domain.posterior) {
      const double e = std::exp(-std::abs(log_odds(domain, x)));
      return domain.density(x) * e / (1.0 + e);
    }
    if (domain.priors[0] <= 0.0 || domain.priors[1] <= 0.0) return 0.0;
    const auto& c = domain.conditionals.classes;
    return std::exp(std::min(std::log(domain.priors[0]) + c[0].log_density(x),
                             std::log(domain.priors[1]) + c[1].log_density(x)));
  };

  BayesErrorResult out;
  if (dim == 1) {
    auto f = [&](double t) { return pointwise(Vector::Constant(1, t)); };
    const auto pts = with_points(breakpoints(axis_moments(domain, 0), NAN),
                                 boundary_crossings(domain, Vector::Zero(1), Vector::Ones(1)));
    out.value = integrate_pieces(f, pts, kTol * 1e-3, &out.error_estimate);
  } else if (dim == 2) {
    const auto bx = breakpoints(axis_moments(domain, 0), NAN);
    const auto by = breakpoints(axis_moments(domain, 1), NAN);
    double outer_err = 0.0;
    auto outer = [&](double a) {
      auto inner = [&](double b) { return pointwise((Vector(2) << a, b).finished()); };
      const auto pts = with_points(by, boundary_crossings(domain, (Vector(2) << a, 0.0).finished(),
                                                          (Vector(2) << 0.0, 1.0).finished()));
      return integrate_pieces(inner, pts, kTol * 1e-2, nullptr);
    };
    out.value = integrate_pieces(outer, bx, kTol * 1e-2, &outer_err);
    out.error_estimate = outer_err;
  } else {
    require(stream != nullptr, "bayes_error: Monte Carlo estimation above 2-d needs a random stream");
    const Dataset draws = sample_domain(domain, mc_samples, *stream);
    double sum = 0.0, sum_sq = 0.0;
    for (Eigen::Index i = 0; i < draws.features.rows(); ++i) {
      const double q = domain.prob_positive(draws.features.row(i).transpose());
      const double e = std::min(q, 1.0 - q);
      sum += e;
      sum_sq += e * e;
    }
    const double n = static_cast<double>(mc_samples);
    out.value = sum / n;
    out.error_estimate = std::sqrt(std::max(0.0, sum_sq / n - out.value * out.value) / n);
    out.monte_carlo = true;
  }
  require(std::isfinite(out.value) && out.error_estimate <= 1e-3, "bayes_error: integration did not converge",
          ErrorCode::kNotConverged);
  out.value = std::clamp(out.value, 0.0, 0.5);
  return out;
}

double linear_rule_risk(const DomainSpec& domain, const Vector& coef, double intercept) {
  domain.check();
  require(coef.size() == static_cast<Eigen::Index>(domain.conditionals.dim()), "linear_rule_risk: dimension mismatch",
          ErrorCode::kDimensionMismatch);
  if (!domain.posterior) {
    double risk = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& g = domain.conditionals.classes[c];
      const double mu = coef.dot(g.mean) + intercept;
      const double var = coef.dot(g.cov * coef);
      double p_positive;  // P(score >= 0)
      if (var <= 0.0) {
        p_positive = mu >= 0.0 ? 1.0 : 0.0;
      } else {
        p_positive = normal_cdf(mu / std::sqrt(var));
      }
      risk += domain.priors[c] * (c == 1 ? 1.0 - p_positive : p_positive);
    }
    return risk;
  }

  require(domain.conditionals.dim() == 1, "linear_rule_risk: logistic-posterior domains supported in 1-d only");
  const double w = coef(0);
  auto err_at = [&](double t) {
    const Vector x = Vector::Constant(1, t);
    const double s = log_odds(domain, x);
    const bool positive = w * t + intercept >= 0.0;
    return domain.density(x) * sigmoid(positive ? -s : s);
  };
  const double cut = w != 0.0 ? -intercept / w : NAN;
  return integrate_pieces(err_at, breakpoints(axis_moments(domain, 0), cut), 1e-10, nullptr);
}

double gaussian_renyi2_exp(const GaussianParams& target, const GaussianParams& source) {
  target.check();
  source.check();
  require(target.mean.size() == source.mean.size(), "renyi2: dimension mismatch", ErrorCode::kDimensionMismatch);
  const Matrix mixed = 2.0 * source.cov - target.cov;
  Eigen::SelfAdjointEigenSolver<Matrix> es(mixed, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) return INFINITY;
  auto log_det = [](const Matrix& a) {
    Eigen::LLT<Matrix> l(a);
    return 2.0 * l.matrixLLT().diagonal().array().log().sum();
  };
  Eigen::LLT<Matrix> llt(mixed);
  const Vector diff = target.mean - source.mean;
  const double quad = diff.dot(llt.solve(diff));
  const double log_d2 = quad - 0.5 * (log_det(mixed) + log_det(target.cov) - 2.0 * log_det(source.cov));
  return std::exp(log_d2);
}

GaussianParams moment_match(const DomainSpec& domain) {
  const auto& c = domain.conditionals.classes;
  const Vector mean = domain.priors[0] * c[0].mean + domain.priors[1] * c[1].mean;
  Matrix cov = Matrix::Zero(mean.size(), mean.size());
  for (std::size_t k = 0; k < 2; ++k) {
    const Vector d = c[k].mean - mean;
    cov += domain.priors[k] * (c[k].cov + d * d.transpose());
  }
  return {mean, cov};
}

}  // namespace shiftlab
