#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdae::metrics {

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U from mid-ranks). Labels are 0 or 1 and
/// both classes must be present, otherwise MetricError.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// (auc_new - auc_baseline) / (1 - auc_baseline); MetricError when the baseline is 1.
double error_reduction(double auc_new, double auc_baseline);

struct CategoryResult {
  std::string category_id;
  std::vector<double> fold_auc;
  std::vector<double> fold_lambda;

  double mean_auc() const;
};

/// Reference averages reported for the full atlas-scale experiment.
inline constexpr double kReferenceTop15Auc = 0.997;
inline constexpr double kReferenceAllCategoriesAuc = 0.988;
inline constexpr double kPriorBagOfWordsTop15Auc = 0.92;
inline constexpr double kPriorTransferLearningAuc = 0.894;

struct AucReport {
  std::vector<CategoryResult> categories;
  std::vector<std::string> warnings;
  std::optional<double> baseline_auc;

  /// Mean of per-category means; empty when there are no categories.
  std::optional<double> overall_mean() const;
  std::optional<double> error_reduction() const;

  /// Header `category_id,mean_auc,fold1..foldK,lambda1..lambdaK`, one row per
  /// category, then summary rows `__overall__`, and with a baseline also
  /// `__baseline__` and `__error_reduction__`, each carrying its value in the
  /// mean_auc column.
  std::string to_csv() const;
};

}  // namespace cdae::metrics
