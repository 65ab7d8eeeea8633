#include "shiftlab/weights.hpp"

#include "shiftlab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shiftlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_pair(const Dataset& source, const Dataset& target, const char* who) {
  validate_or_throw(source, std::string(who) + " source");
  validate_or_throw(target, std::string(who) + " target");
  require(source.dim() == target.dim(), std::string(who) + ": source and target dimensionality differ",
          ErrorCode::kDimensionMismatch);
}

struct FittedGaussian {
  Vector mean;
  Eigen::LLT<Matrix> chol;
  double log_det = 0.0;

  double log_density(const Eigen::Ref<const Vector>& x) const {
    const Vector z = chol.matrixL().solve(x - mean);
    return -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det + z.squaredNorm());
  }
};

FittedGaussian fit_gaussian(const Matrix& x, const char* which) {
  require(x.rows() >= x.cols() + 1, std::string("gaussian ratio: ") + which + " needs at least D+1 samples");
  FittedGaussian g;
  g.mean = x.colwise().mean().transpose();
  const Matrix centred = x.rowwise() - g.mean.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  require(es.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1.0),
          std::string("gaussian ratio: fitted ") + which + " covariance is singular", ErrorCode::kSingular);
  g.chol.compute(cov);
  g.log_det = es.eigenvalues().array().log().sum();
  return g;
}

/// log of the Gaussian KDE of `sample` at every row of `points`.
Vector log_kde(const Matrix& points, const Matrix& sample, double bandwidth) {
  const Matrix d2 = squared_distances(points, sample);
  const double dim = static_cast<double>(sample.cols());
  const double log_norm = -std::log(static_cast<double>(sample.rows())) - dim * std::log(bandwidth) - 0.5 * dim * kLog2Pi;
  Vector out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::ArrayXd e = -d2.row(i).array() / (2.0 * bandwidth * bandwidth);
    const double hi = e.maxCoeff();
    out(i) = log_norm + hi + std::log((e - hi).exp().sum());
  }
  return out;
}

}  // namespace

double WeightVector::infeasibility() const {
  if (values.size() == 0) return 0.0;
  double v = std::max(0.0, -values.minCoeff());
  if (constraints.mean_deviation) v = std::max(v, std::abs(values.mean() - 1.0) - *constraints.mean_deviation);
  if (constraints.cap) v = std::max(v, values.maxCoeff() - *constraints.cap);
  return std::max(v, 0.0);
}

WeightVector WeightVector::normalized() const {
  WeightVector out = *this;
  const double mean = values.mean();
  require(mean > 0.0, "weights: cannot normalize an all-zero weight vector");
  out.values /= mean;
  out.constraints = {};
  out.estimator = estimator + "(normalized)";
  return out;
}

WeightVector unit_weights(std::size_t n) {
  WeightVector w;
  w.values = Vector::Ones(static_cast<Eigen::Index>(n));
  w.estimator = "unit";
  return w;
}

WeightVector gaussian_ratio_weights(const Dataset& source, const Dataset& target) {
  check_pair(source, target, "gaussian ratio");
  const auto fs = fit_gaussian(source.features, "source");
  const auto ft = fit_gaussian(target.features, "target");
  WeightVector w;
  w.estimator = "gaussian";
  w.values.resize(source.features.rows());
  for (Eigen::Index i = 0; i < source.features.rows(); ++i) {
    const Vector x = source.features.row(i).transpose();
    w.values(i) = std::exp(ft.log_density(x) - fs.log_density(x));
  }
  return w;
}

KdeWeights kde_ratio_weights(const Dataset& source, const Dataset& target, double bandwidth_source,
                             double bandwidth_target) {
  check_pair(source, target, "kde ratio");
  require(bandwidth_source > 0.0 && bandwidth_target > 0.0 && std::isfinite(bandwidth_source) &&
              std::isfinite(bandwidth_target),
          "kde ratio: bandwidths must be positive");
  const Vector log_ps = log_kde(source.features, source.features, bandwidth_source);
  const Vector log_pt = log_kde(source.features, target.features, bandwidth_target);
  KdeWeights out;
  out.weights.estimator = "kde";
  out.weights.values.resize(log_ps.size());
  const double log_floor = std::log(kKdeDensityFloor);
  for (Eigen::Index i = 0; i < log_ps.size(); ++i) {
    if (log_ps(i) < log_floor) {
      out.weights.values(i) = kDefaultWeightCap;
      ++out.floored;
    } else {
      out.weights.values(i) = std::exp(log_pt(i) - log_ps(i));
    }
  }
  return out;
}

WeightVector kmm_weights(const Dataset& source, const Dataset& target, const KmmOptions& options) {
  check_pair(source, target, "kmm");
  require(options.cap > 0.0, "kmm: cap B must be positive");
  const double n = static_cast<double>(source.rows());
  const double m = static_cast<double>(target.rows());
  const double eps = options.mean_deviation.value_or((std::sqrt(n) - 1.0) / std::sqrt(n));
  require(eps >= 0.0, "kmm: eps must be nonnegative");
  const KernelSpec spec = resolve_kernel(options.kernel, source.features, target.features);

  const Matrix k = gram(source.features, source.features, spec);
  const Vector kappa = gram(source.features, target.features, spec).rowwise().sum();
  const auto size = static_cast<Eigen::Index>(source.rows());
  // Solved scaled by n so gradients are O(1) and the tolerance is meaningful.
  optim::QpProblem qp(2.0 * k / n, -2.0 * kappa / m, Vector::Zero(size), Vector::Constant(size, options.cap), eps);
  optim::QpOptions qo;
  qo.tolerance = options.tolerance;
  qo.budget = options.budget;
  const auto sol = optim::solve_qp(qp, qo);

  WeightVector w;
  w.estimator = "kmm";
  w.values = sol.x.cwiseMax(0.0);
  w.constraints = {eps, options.cap};
  w.objective = sol.objective / n;
  w.kkt_residual = sol.kkt_residual;
  w.iterations = sol.iterations;
  w.converged = sol.converged;
  return w;
}

Matrix default_centers(const Dataset& target, RandomStream& stream, std::size_t count) {
  const std::size_t m = target.rows();
  require(m >= 1, "centers: empty target");
  auto idx = stream.sample_without_replacement(m, std::min(m, count));
  std::sort(idx.begin(), idx.end());
  Matrix c(static_cast<Eigen::Index>(idx.size()), target.features.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) c.row(static_cast<Eigen::Index>(i)) = target.features.row(static_cast<Eigen::Index>(idx[i]));
  return c;
}

Vector BasisRatioModel::evaluate(const Matrix& points) const { return gram(points, centers, kernel) * alpha; }

KliepResult kliep_weights(const Dataset& source, const Dataset& target, const Matrix& centers,
                          const std::optional<KernelSpec>& kernel) {
  check_pair(source, target, "kliep");
  require(centers.rows() >= 1, "kliep: no basis centers");
  require(centers.cols() == static_cast<Eigen::Index>(source.dim()), "kliep: center dimensionality mismatch",
          ErrorCode::kDimensionMismatch);
  const KernelSpec spec = resolve_kernel(kernel, source.features, target.features);
  const Matrix phi_source = gram(source.features, centers, spec);
  const Matrix phi_target = gram(target.features, centers, spec);
  const Vector source_mean = phi_source.colwise().mean().transpose();

  const auto sol = optim::solve_kliep(phi_target, source_mean);
  require(sol.converged, "kliep: projected gradient did not converge", ErrorCode::kNotConverged);

  KliepResult out;
  out.model = {centers, spec, sol.alpha};
  out.weights.estimator = "kliep";
  out.weights.values = (phi_source * sol.alpha).cwiseMax(0.0);
  out.weights.constraints.mean_deviation = 0.0;
  out.weights.objective = sol.objective;
  out.weights.kkt_residual = sol.kkt_residual;
  out.weights.iterations = sol.iterations;
  out.weights.converged = sol.converged;
  return out;
}

LsifResult lsif_weights(const Dataset& source, const Dataset& target, const Matrix& centers,
                        const std::optional<KernelSpec>& kernel, double lambda) {
  check_pair(source, target, "lsif");
  require(lambda >= 0.0 && std::isfinite(lambda), "lsif: lambda must be nonnegative");
  require(centers.rows() >= 1, "lsif: no basis centers");
  require(centers.cols() == static_cast<Eigen::Index>(source.dim()), "lsif: center dimensionality mismatch",
          ErrorCode::kDimensionMismatch);
  const KernelSpec spec = resolve_kernel(kernel, source.features, target.features);
  const Matrix phi_source = gram(source.features, centers, spec);
  const Matrix phi_target = gram(target.features, centers, spec);
  const Matrix h_mat = phi_source.transpose() * phi_source / static_cast<double>(source.rows());
  const Vector h_vec = phi_target.colwise().mean().transpose();

  const auto b = centers.rows();
  const auto sol = optim::solve_nonnegative_qp(h_mat, h_vec - Vector::Constant(b, lambda));
  require(sol.converged, "lsif: solver did not converge", ErrorCode::kNotConverged);

  LsifResult out;
  out.model = {centers, spec, sol.x};
  out.weights.estimator = "lsif";
  out.weights.values = (phi_source * sol.x).cwiseMax(0.0);
  out.weights.objective = sol.objective;
  out.weights.kkt_residual = sol.kkt_residual;
  out.weights.iterations = sol.iterations;
  return out;
}

WeightVector voronoi_weights(const Dataset& source, const Dataset& target, bool laplace) {
  check_pair(source, target, "voronoi");
  WeightVector w;
  w.estimator = laplace ? "voronoi(laplace)" : "voronoi";
  w.values = Vector::Constant(source.features.rows(), laplace ? 1.0 : 0.0);
  for (Eigen::Index j = 0; j < target.features.rows(); ++j) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < source.features.rows(); ++i) {
      const double d = (source.features.row(i) - target.features.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    w.values(best) += 1.0;
  }
  return w;
}

double pearson(const Vector& a, const Vector& b) {
  require(a.size() == b.size() && a.size() >= 2, "pearson: need two equal-length sequences");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  require(denom > 0.0, "pearson: zero variance");
  return (da * db).sum() / denom;
}

}  // namespace shiftlab
