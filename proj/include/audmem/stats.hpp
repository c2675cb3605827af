#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace audmem {

// ---------------------------------------------------------------------------
// Rank correlation

/// Fractional (average) ranks, 1-based.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> fractional_ranks(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) == v(order[static_cast<std::size_t>(i)])) ++j;
    const Scalar avg = static_cast<Scalar>(i + j) / 2 + 1;
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = avg;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation; NaN when either side has zero variance.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const auto ca = (a.array() - a.mean()).matrix().eval();
  const auto cb = (b.array() - b.mean()).matrix().eval();
  const Scalar denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (!(denom > Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
  return std::clamp(ca.dot(cb) / denom, Scalar(-1), Scalar(1));
}

struct SpearmanResult {
  double rho = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::string> undefined_reason;

  bool defined() const { return !undefined_reason.has_value(); }
};

template <typename DerivedA, typename DerivedB>
SpearmanResult spearman(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) return {std::numeric_limits<double>::quiet_NaN(), "length mismatch"};
  if (a.size() < 3) return {std::numeric_limits<double>::quiet_NaN(), "fewer than 3 observations"};
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  const double rho = pearson(ra, rb);
  if (std::isnan(rho)) return {rho, "constant input has no ranking"};
  return {rho, std::nullopt};
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
  Eigen::MatrixXd x;  ///< n_samples x n_features
  Eigen::VectorXd y;
  std::vector<std::string> names;
  std::vector<std::string> row_ids;
};

/// Column-wise z-scoring parameters.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  Eigen::MatrixXd invert(const Eigen::Ref<const Eigen::MatrixXd>& z) const;
};

/// Population standard deviation; zero-variance columns get scale 1.
Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& x);

/// Drops rows with NaN and zero-variance columns, then z-scores the rest.
/// `dropped` receives the names of removed columns.
Dataset prepare_dataset(const Dataset& raw, std::vector<std::string>* dropped = nullptr,
                        Standardizer* fitted = nullptr);

// ---------------------------------------------------------------------------
// Nonlinear regression

enum class RegressorKind { rbf_kernel_ridge, epsilon_svr };

struct RegressorConfig {
  RegressorKind kind = RegressorKind::rbf_kernel_ridge;
  double gamma = 0.0;               ///< RBF width; 0 selects 1 / n_features
  double ridge_per_feature = 0.3;   ///< kernel ridge: lambda = this * n_features
  double ridge = 0.0;               ///< kernel ridge: explicit lambda when > 0
  double svr_c = 1.0;
  double svr_epsilon = 0.1;
  double svr_tolerance = 1e-3;
  int svr_max_iterations = 1'000'000;

  double gamma_for(Eigen::Index n_features) const;
  double ridge_for(Eigen::Index n_features) const;
};

struct RegressorModel {
  RegressorKind kind = RegressorKind::rbf_kernel_ridge;
  double gamma = 1.0;
  double ridge = 1.0;
  double svr_c = 1.0;
  double svr_epsilon = 0.1;
  Eigen::MatrixXd support;  ///< training inputs
  Eigen::VectorXd coef;     ///< dual coefficients
  double intercept = 0.0;
};

Eigen::MatrixXd rbf_kernel(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                           double gamma);

/// Throws FitError when the system is singular or the solver does not
/// produce finite coefficients.
RegressorModel fit_regressor(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const RegressorConfig& cfg = {});
Eigen::VectorXd predict(const RegressorModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// 1 - SS_res / SS_tot; 0 when SS_tot is 0.
double r2(const Eigen::Ref<const Eigen::VectorXd>& predicted, const Eigen::Ref<const Eigen::VectorXd>& y);

/// In-sample R^2 of a fit on (x, y).
double fit_r2(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
              const RegressorConfig& cfg = {});

struct FeatureScore {
  std::string name;
  double r2 = 0.0;
  std::optional<std::string> error;
};

/// One univariate fit per column of a prepared dataset.
std::vector<FeatureScore> single_feature_r2(const Dataset& ds, const RegressorConfig& cfg = {});

// ---------------------------------------------------------------------------
// Sampled Shapley importance

struct ShapleyConfig {
  int iterations = 10000;
  int n_min = 1;
  int n_max = 10;
  std::uint64_t seed = 0;
  RegressorConfig regressor;
  unsigned threads = 0;  ///< 0 = hardware concurrency
  bool with_individual_r2 = true;
};

struct ImportanceEntry {
  std::string name;
  double individual_r2 = std::numeric_limits<double>::quiet_NaN();
  double shapley_delta_r2 = 0.0;
  long n_evaluations = 0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;  ///< descending shapley_delta_r2
  int iterations = 0;
  int skipped_iterations = 0;
  int n_min = 1;
  int n_max = 10;
  std::uint64_t seed = 0;

  std::string to_csv() const;
  const ImportanceEntry* find(const std::string& name) const;
  std::optional<std::size_t> rank_of(const std::string& name) const;
};

/// Each iteration draws N ~ U{n_min..n_max} base columns, fits them, then
/// records the R^2 gain of appending every remaining column on its own.
/// Iteration i uses seed + i, so results do not depend on thread count.
/// Expects a prepared (standardized) dataset with more than n_max columns.
ImportanceReport shapley_importance(const Dataset& ds, const ShapleyConfig& cfg = {});

// ---------------------------------------------------------------------------
// Logistic classification

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Mean log-loss plus (l2 / 2) * ||w||^2; the bias is not penalized.
double logistic_objective(const Eigen::Ref<const Eigen::VectorXd>& weights, double bias,
                          const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                          double l2);

/// Gradient of logistic_objective; the last entry is d/d bias.
Eigen::VectorXd logistic_gradient(const Eigen::Ref<const Eigen::VectorXd>& weights, double bias,
                                  const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& labels, double l2);

/// Labels must be 0/1 with both classes present (DegenerateLabels otherwise).
/// Converges to gradient norm <= tolerance.
LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           double l2 = 1e-3, double tolerance = 1e-6, int max_iterations = 200);

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x);
double accuracy(const LogisticModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& labels);

struct CrossValidationConfig {
  int folds = 5;
  double holdout = 0.15;
  std::uint64_t seed = 0;
  double l2 = 1e-3;
};

struct CrossValidationResult {
  std::vector<double> fold_accuracies;
  double holdout_accuracy = 0.0;
  std::vector<Eigen::Index> holdout_rows;
  std::vector<int> fold_of;  ///< fold index per row, -1 for holdout
};

/// Stratified holdout first, then stratified folds on the remainder; the
/// holdout score comes from a model refit on all non-holdout rows. Features
/// are standardized with training statistics inside every fit.
CrossValidationResult cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& labels,
                                     const CrossValidationConfig& cfg = {});

}  // namespace audmem
