// Data model shared by every shiftlab module: datasets, loss tags,
// validation and per-domain standardization.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotConverged,
  kSingular,
  kIo,
};

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::kInvalidArgument) {
  if (!cond) throw Error(code, what);
}

/// Feature matrix (one sample per row) with optional labels in {-1,+1}.
struct Dataset {
  Matrix features;
  std::optional<std::vector<int>> labels;

  Dataset() = default;
  explicit Dataset(Matrix x) : features(std::move(x)) {}
  Dataset(Matrix x, std::vector<int> y) : features(std::move(x)), labels(std::move(y)) {}

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool labeled() const { return labels.has_value(); }
  const std::vector<int>& y() const;
  /// Copy without labels; used to hand target data to adaptation methods.
  Dataset unlabeled() const { return Dataset(features); }
};

enum class LossKind { kZeroOne, kQuadratic, kLogistic, kHinge };

std::string to_string(LossKind kind);
LossKind loss_from_string(const std::string& name);

enum class ValidationIssue { kEmpty, kNonFinite, kLabelLength, kLabelValue };

struct ValidationError {
  ValidationIssue issue;
  std::size_t row = 0;
  std::string message;
};

/// Empty optional when every Dataset invariant holds.
std::optional<ValidationError> validate(const Dataset& data);

/// Throws Error carrying the validation message.
void validate_or_throw(const Dataset& data, const std::string& what = "dataset");

enum class StandardizeMode { kPerDomain, kPooled };

/// Per-feature affine map x -> (x - mean) / scale, one for each domain.
struct StandardizeTransform {
  StandardizeMode mode = StandardizeMode::kPerDomain;
  Vector source_mean, source_scale;
  Vector target_mean, target_scale;

  Matrix apply_source(const Matrix& x) const;
  Matrix apply_target(const Matrix& x) const;
  Matrix invert_source(const Matrix& x) const;
  Matrix invert_target(const Matrix& x) const;
};

struct StandardizeResult {
  Dataset source;
  Dataset target;
  StandardizeTransform transform;
};

inline constexpr double kMinFeatureVariance = 1e-12;

StandardizeResult standardize(const Dataset& source, const Dataset& target, StandardizeMode mode);

/// Class frequencies ordered (p(y=-1), p(y=+1)).
using PriorPair = std::array<double, 2>;

inline std::size_t class_slot(int label) { return label > 0 ? 1 : 0; }

PriorPair class_priors(const Dataset& data);

/// Stacks rows of a over rows of b.
Matrix vstack(const Matrix& a, const Matrix& b);

}  // namespace shiftlab
