#include "shiftlab/robust.hpp"

#include "shiftlab/optim.hpp"

#include <cmath>
#include <limits>

namespace shiftlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_two_cosh(double a) {
  const double t = std::abs(a);
  return t + std::log1p(std::exp(-2.0 * t));
}

/// Entropy (nats) of a {-1,+1} distribution with E[y] = tanh(a).
double entropy_from_logit(double a) { return log_two_cosh(a) - a * std::tanh(a); }

void fit_gaussian(const Matrix& x, Vector& mean, Matrix& cov) {
  mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - mean.transpose();
  cov = c.transpose() * c / static_cast<double>(x.rows());
  cov.diagonal().array() += 1e-6 * std::max(1.0, cov.diagonal().maxCoeff());
}

Vector gaussian_log_density(const Matrix& x, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  require(llt.info() == Eigen::Success, "rba: fitted covariance not positive definite", ErrorCode::kSingular);
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Matrix z = llt.matrixL().solve((x.rowwise() - mean.transpose()).transpose());
  Vector out = -0.5 * z.colwise().squaredNorm().transpose();
  out.array() -= 0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det);
  return out;
}

}  // namespace

Matrix RbaModel::features(const Matrix& x) const {
  const Matrix s = (x.rowwise() - feature_mean.transpose()).array().rowwise() / feature_scale.transpose().array();
  const auto d = s.cols();
  const auto extra = moment_order >= 2 ? d * (d + 1) / 2 : 0;
  Matrix phi(x.rows(), 1 + d + extra);
  phi.col(0).setOnes();
  phi.middleCols(1, d) = s;
  Eigen::Index col = 1 + d;
  if (moment_order >= 2)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = a; b < d; ++b) phi.col(col++) = s.col(a).cwiseProduct(s.col(b));
  return phi;
}

Vector RbaModel::density_ratio(const Matrix& x) const {
  const Vector log_ratio = gaussian_log_density(x, source_mean, source_cov) - gaussian_log_density(x, target_mean, target_cov);
  return log_ratio.unaryExpr([this](double v) { return std::min(std::exp(std::min(v, 700.0)), ratio_cap); });
}

Vector RbaModel::posterior(const Matrix& x) const {
  const Vector a = density_ratio(x).cwiseProduct(features(x) * theta);
  return a.unaryExpr([](double v) { return 0.5 * (1.0 + std::tanh(v)); });
}

RbaResult rba_train(const Dataset& source, const Dataset& target, const RbaOptions& options) {
  validate_or_throw(source, "rba source");
  validate_or_throw(target, "rba target");
  require(source.labeled(), "rba: source labels required");
  require(source.dim() == target.dim(), "rba: dimension mismatch", ErrorCode::kDimensionMismatch);
  require(options.moment_order == 1 || options.moment_order == 2, "rba: moment order must be 1 or 2");

  RbaModel model;
  model.moment_order = options.moment_order;
  model.ratio_cap = options.ratio_cap;
  model.feature_mean = source.features.colwise().mean().transpose();
  model.feature_scale = ((source.features.rowwise() - model.feature_mean.transpose()).array().square().colwise().mean())
                            .sqrt()
                            .transpose();
  model.feature_scale = model.feature_scale.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  fit_gaussian(source.features, model.source_mean, model.source_cov);
  fit_gaussian(target.features, model.target_mean, model.target_cov);

  const Matrix phi_s = model.features(source.features);
  const Matrix phi_t = model.features(target.features);
  const Vector r = model.density_ratio(target.features);
  const auto& ys = source.y();
  Vector y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) y(static_cast<Eigen::Index>(i)) = ys[i];
  const Vector source_moments = phi_s.transpose() * y / static_cast<double>(source.rows());
  const Matrix weighted_phi = r.asDiagonal() * phi_t;  // rows r_j phi_j
  const double m = static_cast<double>(target.rows());

  auto dual = [&](const Vector& th) {
    const Vector a = weighted_phi * th;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) acc += log_two_cosh(a(j));
    return acc / m - th.dot(source_moments);
  };
  auto residual_at = [&](const Vector& a) -> Vector {
    return weighted_phi.transpose() * a.unaryExpr([](double v) { return std::tanh(v); }) / m - source_moments;
  };

  RbaResult out;
  Vector theta = Vector::Zero(phi_t.cols());
  double f = dual(theta);
  int it = 0;
  for (;; ++it) {
    const Vector a = weighted_phi * theta;
    const Vector grad = residual_at(a);
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) entropy += entropy_from_logit(a(j));
    entropy /= m;
    out.report.primal_objective = f;
    out.report.adversary_objective = entropy;
    out.report.gap = std::abs(f - entropy);
    out.moment_residual = grad;
    if ((out.report.gap <= options.gap_tolerance && grad.cwiseAbs().maxCoeff() <= options.moment_tolerance) ||
        it >= options.budget)
      break;

    // Adversary: damped Newton step on the multiplier; predictor: best response h = g.
    const Vector curv = a.unaryExpr([](double v) {
      const double c = std::cosh(std::min(std::abs(v), 350.0));
      return 1.0 / (c * c);
    });
    Matrix hess = weighted_phi.transpose() * curv.asDiagonal() * weighted_phi / m;
    hess.diagonal().array() += 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
    Vector dir = -hess.ldlt().solve(grad);
    if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = -grad;
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      const Vector trial = theta + step * dir;
      const double ft = dual(trial);
      if (ft <= f + 1e-4 * step * grad.dot(dir)) {
        theta = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  model.theta = theta;
  out.report.iterations = it;
  out.report.converged =
      out.report.gap <= options.gap_tolerance && out.moment_residual.cwiseAbs().maxCoeff() <= options.moment_tolerance;
  out.target_posterior = model.posterior(target.features);
  out.model = std::move(model);
  return out;
}

double worst_case_objective(const LinearModel& model, const Dataset& source, double eps, std::optional<double> cap) {
  const Vector losses = sample_losses(model, source, model.loss);
  return optim::solve_mean_band_lp(losses, eps, cap).optimum + model.lambda * model.coef.squaredNorm();
}

MinimaxResult minimax_weight_train(const Dataset& source, const MinimaxOptions& options) {
  validate_or_throw(source, "minimax source");
  require(source.labeled(), "minimax: source labels required");
  require(options.eps >= 0.0, "minimax: eps must be nonnegative");
  require(options.loss != LossKind::kZeroOne, "minimax: zero-one loss cannot be trained");
  const auto n = static_cast<Eigen::Index>(source.rows());

  // Fictitious play: the model best-responds to the running average of the
  // adversary's exact LP responses; the best iterate is kept.
  TrainOptions topts;
  topts.max_iterations = 5000;
  auto fit = train_weighted(source, Vector(Vector::Ones(n)), options.loss, options.lambda, topts);
  LinearModel current = fit.model;
  double lower_bound = fit.objective;  // min over models under a feasible w

  MinimaxResult out;
  out.model = current;
  double best = worst_case_objective(current, source, options.eps, options.cap);
  Vector best_w = optim::solve_mean_band_lp(sample_losses(current, source, options.loss), options.eps, options.cap).weights;
  out.history.push_back(best);

  Vector average = Vector::Zero(n);
  double previous = best;
  int it = 1;
  for (; it <= options.budget; ++it) {
    const auto lp = optim::solve_mean_band_lp(sample_losses(current, source, options.loss), options.eps, options.cap);
    average += (lp.weights - average) / static_cast<double>(it);
    fit = train_weighted(source, average, options.loss, options.lambda, topts);
    lower_bound = std::max(lower_bound, fit.objective);
    current = fit.model;
    const double value = worst_case_objective(current, source, options.eps, options.cap);
    if (value < best) {
      best = value;
      out.model = current;
      best_w = optim::solve_mean_band_lp(sample_losses(current, source, options.loss), options.eps, options.cap).weights;
    }
    out.history.push_back(best);
    if (std::abs(value - previous) < options.tolerance || best - lower_bound < options.tolerance) break;
    previous = value;
  }

  out.worst_weights.values = best_w;
  out.worst_weights.estimator = "minimax-worst-case";
  out.worst_weights.constraints = {options.eps, options.cap};
  out.report.primal_objective = best;
  out.report.adversary_objective = lower_bound;
  out.report.gap = std::abs(best - lower_bound);
  out.report.iterations = std::min(it, options.budget);
  out.report.converged = out.report.gap < 1e-3 || it <= options.budget;
  return out;
}

}  // namespace shiftlab
