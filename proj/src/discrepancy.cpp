#include "shiftlab/discrepancy.hpp"

#include "shiftlab/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shiftlab {

nlohmann::json DiscrepancyReport::to_json() const {
  nlohmann::json j;
  j["measure"] = measure;
  if (std::isinf(value)) {
    j["value"] = "inf";
  } else {
    j["value"] = value;
  }
  j["meta"] = meta;
  if (clamped) j["meta"]["clamped"] = true;
  return j;
}

namespace {

/// Weighted quadratic forms of the three Gram blocks.
struct MmdTerms {
  double xx = 0.0, xz = 0.0, zz = 0.0;
};

MmdTerms mmd_terms(const Matrix& kxx, const Matrix& kxz, const Matrix& kzz, const Vector& w, bool unbiased) {
  const double n = static_cast<double>(kxx.rows());
  const double m = static_cast<double>(kzz.rows());
  MmdTerms t;
  double sxx = w.dot(kxx * w);
  double szz = kzz.sum();
  if (unbiased) {
    sxx -= (w.array().square() * kxx.diagonal().array()).sum();
    szz -= kzz.diagonal().sum();
    t.xx = sxx / (n * (n - 1.0));
    t.zz = szz / (m * (m - 1.0));
  } else {
    t.xx = sxx / (n * n);
    t.zz = szz / (m * m);
  }
  t.xz = w.dot(kxz.rowwise().sum()) / (n * m);
  return t;
}

}  // namespace

DiscrepancyReport mmd2(const Matrix& x, const Matrix& z, const std::optional<KernelSpec>& kernel,
                       const std::optional<Vector>& weights, MmdEstimator estimator) {
  require(x.cols() == z.cols(), "mmd: dimension mismatch", ErrorCode::kDimensionMismatch);
  require(x.rows() >= 1 && z.rows() >= 1, "mmd: empty sample");
  const bool unbiased = estimator == MmdEstimator::kUnbiased;
  if (unbiased) require(x.rows() >= 2 && z.rows() >= 2, "mmd: unbiased estimate needs two samples per domain");
  const Vector w = weights ? *weights : Vector(Vector::Ones(x.rows()));
  require(w.size() == x.rows(), "mmd: weight count does not match sample count", ErrorCode::kDimensionMismatch);

  const KernelSpec spec = resolve_kernel(kernel, x, z);
  const auto t = mmd_terms(gram(x, x, spec), gram(x, z, spec), gram(z, z, spec), w, unbiased);

  DiscrepancyReport r;
  r.measure = unbiased ? "mmd2_unbiased" : "mmd2";
  r.value = t.xx - 2.0 * t.xz + t.zz;
  if (r.value < 0.0) {
    r.clamped = true;
    r.value = 0.0;
  }
  r.meta["kernel"] = spec.describe();
  r.meta["weighted"] = weights.has_value();
  return r;
}

PermutationTest mmd_permutation_test(const Matrix& x, const Matrix& z, const KernelSpec& kernel, RandomStream& stream,
                                     int permutations) {
  require(permutations >= 1, "permutation test: need at least one permutation");
  const Matrix pooled = vstack(x, z);
  const Matrix k = gram(pooled, pooled, kernel);
  const auto n = x.rows();
  const auto total = pooled.rows();

  auto statistic = [&](const std::vector<std::size_t>& order) {
    double sxx = 0.0, szz = 0.0, sxz = 0.0;
    for (Eigen::Index a = 0; a < total; ++a) {
      for (Eigen::Index b = 0; b < total; ++b) {
        const double v = k(static_cast<Eigen::Index>(order[static_cast<std::size_t>(a)]),
                           static_cast<Eigen::Index>(order[static_cast<std::size_t>(b)]));
        const bool ax = a < n, bx = b < n;
        if (ax && bx) sxx += v;
        else if (!ax && !bx) szz += v;
        else sxz += v;
      }
    }
    const double dn = static_cast<double>(n), dm = static_cast<double>(total - n);
    return sxx / (dn * dn) - sxz / (dn * dm) + szz / (dm * dm);
  };

  std::vector<std::size_t> identity(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  PermutationTest out;
  out.statistic = statistic(identity);
  int exceed = 0;
  for (int p = 0; p < permutations; ++p) {
    const auto order = stream.sample_without_replacement(identity.size(), identity.size());
    if (statistic(order) >= out.statistic) ++exceed;
  }
  out.p_value = (1.0 + exceed) / (1.0 + permutations);
  return out;
}

DiscrepancyReport renyi2_gaussian(const GaussianParams& target, const GaussianParams& source) {
  const double expd = gaussian_renyi2_exp(target, source);
  DiscrepancyReport r;
  r.measure = "renyi2";
  r.value = std::isinf(expd) ? INFINITY : std::max(0.0, std::log(expd));
  if (std::isinf(expd)) {
    r.meta["exponentiated"] = "inf";
    r.meta["existence"] = "2*cov_source - cov_target not positive definite";
  } else {
    r.meta["exponentiated"] = std::max(1.0, expd);
  }
  r.meta["form"] = "log";
  return r;
}

double proxy_a_from_error(double heldout_error) {
  require(heldout_error >= 0.0 && heldout_error <= 1.0, "proxy A-distance: error outside [0,1]");
  return std::clamp(2.0 * (1.0 - 2.0 * heldout_error), 0.0, 2.0);
}

DiscrepancyReport proxy_a_distance(const Matrix& x, const Matrix& z, RandomStream& stream) {
  require(x.cols() == z.cols(), "proxy A-distance: dimension mismatch", ErrorCode::kDimensionMismatch);
  require(x.rows() >= 20 && z.rows() >= 20, "proxy A-distance: need at least 20 samples per domain");

  auto split = [&](const Matrix& data, Matrix& train, Matrix& test) {
    const auto n = static_cast<std::size_t>(data.rows());
    const auto order = stream.sample_without_replacement(n, n);
    const std::size_t half = n / 2;
    train.resize(static_cast<Eigen::Index>(half), data.cols());
    test.resize(static_cast<Eigen::Index>(n - half), data.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = data.row(static_cast<Eigen::Index>(order[i]));
      if (i < half) train.row(static_cast<Eigen::Index>(i)) = row;
      else test.row(static_cast<Eigen::Index>(i - half)) = row;
    }
  };
  Matrix xs_train, xs_test, zt_train, zt_test;
  split(x, xs_train, xs_test);
  split(z, zt_train, zt_test);

  Matrix train = vstack(xs_train, zt_train);
  const Vector mean = train.colwise().mean().transpose();
  Vector scale = ((train.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  scale = scale.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  auto whiten = [&](const Matrix& a) -> Matrix {
    return (a.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  };

  std::vector<int> labels(static_cast<std::size_t>(train.rows()), 1);
  std::fill(labels.begin(), labels.begin() + xs_train.rows(), -1);
  // Balance the two domains so unequal sample sizes do not bias the discriminator.
  Vector w(train.rows());
  w.head(xs_train.rows()).setConstant(0.5 * static_cast<double>(train.rows()) / static_cast<double>(xs_train.rows()));
  w.tail(zt_train.rows()).setConstant(0.5 * static_cast<double>(train.rows()) / static_cast<double>(zt_train.rows()));
  TrainOptions opts;
  opts.max_iterations = 2000;
  const auto fit = train_weighted(Dataset(whiten(train), labels), w, LossKind::kLogistic, 1e-3, opts);

  const auto ps = predict(fit.model, whiten(xs_test));
  const auto pt = predict(fit.model, whiten(zt_test));
  const double err_s = static_cast<double>(std::count(ps.labels.begin(), ps.labels.end(), 1)) / static_cast<double>(ps.labels.size());
  const double err_t = static_cast<double>(std::count(pt.labels.begin(), pt.labels.end(), -1)) / static_cast<double>(pt.labels.size());
  const double err = 0.5 * (err_s + err_t);

  DiscrepancyReport r;
  r.measure = "proxy_a_distance";
  r.value = proxy_a_from_error(err);
  r.meta["heldout_error"] = err;
  r.meta["proxy_for"] = "H-delta-H divergence";
  r.meta["discriminator"] = "logistic";
  return r;
}

DiscrepancyReport hellinger_hist(const Matrix& x, const Matrix& z, int bins) {
  require(x.cols() == z.cols(), "hellinger: dimension mismatch", ErrorCode::kDimensionMismatch);
  require(x.rows() >= 1 && z.rows() >= 1, "hellinger: empty sample");
  require(static_cast<std::size_t>(x.cols()) <= kHistogramMaxDim, "hellinger: histogram estimator limited to D <= 3");
  require(bins >= 1, "hellinger: need at least one bin per dimension");
  const auto dim = x.cols();
  const Vector lo = x.colwise().minCoeff().cwiseMin(z.colwise().minCoeff()).transpose();
  const Vector hi = x.colwise().maxCoeff().cwiseMax(z.colwise().maxCoeff()).transpose();
  require((hi - lo).minCoeff() > 0.0, "hellinger: empty pooled range");

  std::size_t cells = 1;
  for (Eigen::Index k = 0; k < dim; ++k) cells *= static_cast<std::size_t>(bins);
  auto histogram = [&](const Matrix& data) {
    std::vector<double> h(cells, 0.0);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      std::size_t cell = 0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double u = (data(i, k) - lo(k)) / (hi(k) - lo(k));
        const int b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
        cell = cell * static_cast<std::size_t>(bins) + static_cast<std::size_t>(b);
      }
      h[cell] += 1.0;
    }
    for (auto& v : h) v /= static_cast<double>(data.rows());
    return h;
  };
  const auto p = histogram(x);
  const auto q = histogram(z);
  double acc = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double d = std::sqrt(p[c]) - std::sqrt(q[c]);
    acc += d * d;
  }
  DiscrepancyReport r;
  r.measure = "hellinger_hist";
  r.value = std::min(1.0, std::sqrt(0.5 * acc));
  r.meta["bins_per_dim"] = bins;
  return r;
}

double gaussian_hellinger(const GaussianParams& a, const GaussianParams& b) {
  a.check();
  b.check();
  const Matrix avg = 0.5 * (a.cov + b.cov);
  const Vector d = a.mean - b.mean;
  const double log_coef = 0.25 * std::log(a.cov.determinant()) + 0.25 * std::log(b.cov.determinant()) -
                          0.5 * std::log(avg.determinant());
  const double bc = std::exp(log_coef - 0.125 * d.dot(avg.ldlt().solve(d)));
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

}  // namespace shiftlab
