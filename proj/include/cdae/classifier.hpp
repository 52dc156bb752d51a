#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdae/metrics.hpp"
#include "cdae/rng.hpp"

namespace cdae::go {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// GO category -> positive gene ids. Categories iterate in id order.
struct AnnotationTable {
  std::map<std::string, std::vector<std::string>> categories;

  /// TSV lines `category_id<TAB>gene_id`; blank and '#' lines ignored; duplicate pairs collapse.
  static AnnotationTable parse_tsv(const std::string& text);
  static AnnotationTable load_tsv(const std::filesystem::path& path);
  std::string to_tsv() const;

  /// Drops genes outside `universe`, returning one warning per dropped id.
  std::vector<std::string> restrict_to(std::span<const std::string> universe);
  /// Drops categories whose positive count is outside [min_positives, max_positives].
  std::vector<std::string> filter_sizes(std::size_t min_positives, std::size_t max_positives);
};

struct Fold {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

/// Seeded shuffle of each class, then round-robin assignment into k subsets;
/// fold i pairs positive subset i with negative subset i. ConfigError when
/// either class has fewer than k members.
FoldPlan make_folds(std::span<const std::size_t> positives, std::span<const std::size_t> negatives,
                    std::size_t k, Rng& rng);

struct LogRegModel {
  Vector weights;
  double bias = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
};

enum class Solver { kNewton, kGradientDescent };

struct LogRegOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  Solver solver = Solver::kNewton;
};

/// Mean cross-entropy + (lambda / 2) * |w|^2 (bias unregularized), with its gradient.
double logreg_objective(const Matrix& x, std::span<const int> y, const Vector& w, double b,
                        double lambda, Vector* grad_w = nullptr, double* grad_b = nullptr);

/// Deterministic full-batch minimization from zero parameters with a
/// backtracking (Armijo) line search, until the gradient infinity-norm drops
/// below the tolerance or the iteration cap is reached.
LogRegModel train_logreg(const Matrix& x, std::span<const int> y, double lambda,
                         const LogRegOptions& options = {});

double predict_proba(const LogRegModel& model, std::span<const double> features);
Vector predict_proba(const LogRegModel& model, const Matrix& x);

/// Per-column z-scoring fitted on training rows; constant columns get scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

inline const std::vector<double> kDefaultLambdaGrid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};

struct CvOptions {
  std::size_t folds = 5;
  std::vector<double> lambda_grid = kDefaultLambdaGrid;
  LogRegOptions logreg;
};

/// Nested cross-validation for one category. The outer balanced k-fold split
/// gives one test AUC per fold; inside each outer training set an inner
/// balanced split picks lambda by mean AUC (ties go to the smaller lambda),
/// and the final model is refit on the whole outer training set. Every gene
/// not in `positives` is a negative.
metrics::CategoryResult tune_and_evaluate_category(const Matrix& representations,
                                                   std::span<const std::size_t> positives,
                                                   Rng& rng, const CvOptions& options = {});

/// Runs tune_and_evaluate_category for every category of `table`, with one
/// generator per category derived from (seed, category id). Categories are
/// evaluated in parallel; results keep table order. Categories with fewer
/// positives than folds are skipped with a warning.
metrics::AucReport evaluate_all(const Matrix& representations,
                                std::span<const std::string> gene_ids,
                                const AnnotationTable& table, std::uint64_t seed,
                                const CvOptions& options = {});

}  // namespace cdae::go
