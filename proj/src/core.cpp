#include "shiftlab/core.hpp"

#include <cmath>
#include <sstream>

namespace shiftlab {

const std::vector<int>& Dataset::y() const {
  require(labels.has_value(), "dataset has no labels");
  return *labels;
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kZeroOne: return "zero-one";
    case LossKind::kQuadratic: return "quadratic";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kHinge: return "hinge";
  }
  return "unknown";
}

LossKind loss_from_string(const std::string& name) {
  if (name == "zero-one" || name == "zero_one" || name == "01") return LossKind::kZeroOne;
  if (name == "quadratic") return LossKind::kQuadratic;
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "hinge") return LossKind::kHinge;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss '" + name + "'");
}

std::optional<ValidationError> validate(const Dataset& data) {
  const auto n = data.features.rows();
  if (n < 1 || data.features.cols() < 1) {
    return ValidationError{ValidationIssue::kEmpty, 0, "dataset must have at least one row and one column"};
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = data.features(i, j);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << (std::isnan(v) ? "NaN" : "infinite") << " entry at row " << i << ", column " << j;
        return ValidationError{ValidationIssue::kNonFinite, static_cast<std::size_t>(i), os.str()};
      }
    }
  }
  if (data.labels) {
    const auto& y = *data.labels;
    if (y.size() != static_cast<std::size_t>(n)) {
      std::ostringstream os;
      os << "label count " << y.size() << " does not match row count " << n;
      return ValidationError{ValidationIssue::kLabelLength, std::min<std::size_t>(y.size(), n), os.str()};
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != -1 && y[i] != 1) {
        std::ostringstream os;
        os << "illegal label " << y[i] << " at row " << i << " (expected -1 or 1)";
        return ValidationError{ValidationIssue::kLabelValue, i, os.str()};
      }
    }
  }
  return std::nullopt;
}

void validate_or_throw(const Dataset& data, const std::string& what) {
  if (auto err = validate(data)) throw Error(ErrorCode::kInvalidArgument, what + ": " + err->message);
}

namespace {

struct Moments {
  Vector mean;
  Vector scale;
};

Moments fit_moments(const Matrix& x, const char* population) {
  Moments m;
  m.mean = x.colwise().mean().transpose();
  m.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - m.mean(j)).square().mean();
    if (!(var > kMinFeatureVariance)) {
      std::ostringstream os;
      os << "feature " << j << " has variance " << var << " in " << population
         << " population (minimum " << kMinFeatureVariance << ")";
      throw Error(ErrorCode::kInvalidArgument, os.str());
    }
    m.scale(j) = std::sqrt(var);
  }
  return m;
}

Matrix affine(const Matrix& x, const Vector& mean, const Vector& scale) {
  require(x.cols() == mean.size(), "standardize: dimension mismatch", ErrorCode::kDimensionMismatch);
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix unaffine(const Matrix& x, const Vector& mean, const Vector& scale) {
  require(x.cols() == mean.size(), "standardize: dimension mismatch", ErrorCode::kDimensionMismatch);
  return (x.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

}  // namespace

Matrix StandardizeTransform::apply_source(const Matrix& x) const { return affine(x, source_mean, source_scale); }
Matrix StandardizeTransform::apply_target(const Matrix& x) const { return affine(x, target_mean, target_scale); }
Matrix StandardizeTransform::invert_source(const Matrix& x) const { return unaffine(x, source_mean, source_scale); }
Matrix StandardizeTransform::invert_target(const Matrix& x) const { return unaffine(x, target_mean, target_scale); }

StandardizeResult standardize(const Dataset& source, const Dataset& target, StandardizeMode mode) {
  validate_or_throw(source, "source");
  validate_or_throw(target, "target");
  require(source.dim() == target.dim(), "standardize: source and target dimensionality differ",
          ErrorCode::kDimensionMismatch);

  StandardizeTransform t;
  t.mode = mode;
  if (mode == StandardizeMode::kPerDomain) {
    auto s = fit_moments(source.features, "source");
    auto g = fit_moments(target.features, "target");
    t.source_mean = s.mean;
    t.source_scale = s.scale;
    t.target_mean = g.mean;
    t.target_scale = g.scale;
  } else {
    auto p = fit_moments(vstack(source.features, target.features), "pooled");
    t.source_mean = t.target_mean = p.mean;
    t.source_scale = t.target_scale = p.scale;
  }

  StandardizeResult out{source, target, t};
  out.source.features = t.apply_source(source.features);
  out.target.features = t.apply_target(target.features);
  return out;
}

PriorPair class_priors(const Dataset& data) {
  require(data.labeled() && !data.labels->empty(), "class_priors: dataset has no labels");
  std::size_t positives = 0;
  for (int y : *data.labels) {
    require(y == -1 || y == 1, "class_priors: label outside {-1,+1}");
    positives += y > 0 ? 1 : 0;
  }
  const double p = static_cast<double>(positives) / static_cast<double>(data.labels->size());
  return {1.0 - p, p};
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols() || a.rows() == 0 || b.rows() == 0, "vstack: column count mismatch",
          ErrorCode::kDimensionMismatch);
  Matrix out(a.rows() + b.rows(), a.rows() ? a.cols() : b.cols());
  if (a.rows()) out.topRows(a.rows()) = a;
  if (b.rows()) out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace shiftlab
