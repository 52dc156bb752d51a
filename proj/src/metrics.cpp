#include "cdae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae::metrics {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::int64_t positives = 0, negatives = 0;
  for (int l : labels) {
    if (l == 1) ++positives;
    else if (l == 0) ++negatives;
    else throw MetricError("roc_auc: labels must be 0 or 1");
  }
  if (positives == 0 || negatives == 0) throw MetricError("roc_auc: undefined without both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of positives, in integers: a tie group spanning ranks
  // [lo, hi] gives each member the mid-rank (lo + hi) / 2.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const auto lo = static_cast<std::int64_t>(i + 1), hi = static_cast<std::int64_t>(j + 1);
    std::int64_t group_pos = 0;
    for (std::size_t k = i; k <= j; ++k) group_pos += labels[order[k]];
    twice_rank_sum += group_pos * (lo + hi);
    i = j + 1;
  }
  const std::int64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double error_reduction(double auc_new, double auc_baseline) {
  if (auc_baseline == 1.0) throw MetricError("error_reduction: baseline AUC of 1 leaves no error to reduce");
  return (auc_new - auc_baseline) / (1.0 - auc_baseline);
}

double CategoryResult::mean_auc() const {
  if (fold_auc.empty()) return std::nan("");
  return std::accumulate(fold_auc.begin(), fold_auc.end(), 0.0) / static_cast<double>(fold_auc.size());
}

std::optional<double> AucReport::overall_mean() const {
  if (categories.empty()) return std::nullopt;
  double acc = 0.0;
  for (const auto& c : categories) acc += c.mean_auc();
  return acc / static_cast<double>(categories.size());
}

std::optional<double> AucReport::error_reduction() const {
  const auto mean = overall_mean();
  if (!mean || !baseline_auc) return std::nullopt;
  return metrics::error_reduction(*mean, *baseline_auc);
}

std::string AucReport::to_csv() const {
  std::size_t folds = 0;
  for (const auto& c : categories) folds = std::max(folds, c.fold_auc.size());
  const std::size_t columns = 2 + 2 * folds;

  std::ostringstream os;
  os << "category_id,mean_auc";
  for (std::size_t i = 1; i <= folds; ++i) os << ",fold" << i;
  for (std::size_t i = 1; i <= folds; ++i) os << ",lambda" << i;
  os << '\n';

  auto cells = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < folds; ++i) {
      os << ',';
      if (i < v.size()) os << io::format_double(v[i]);
    }
  };
  for (const auto& c : categories) {
    os << c.category_id << ',' << io::format_double(c.mean_auc());
    cells(c.fold_auc);
    cells(c.fold_lambda);
    os << '\n';
  }
  auto summary = [&](const char* name, const std::optional<double>& v) {
    os << name << ',';
    if (v) os << io::format_double(*v);
    for (std::size_t i = 2; i < columns; ++i) os << ',';
    os << '\n';
  };
  summary("__overall__", overall_mean());
  if (baseline_auc) {
    summary("__baseline__", baseline_auc);
    summary("__error_reduction__", error_reduction());
  }
  return os.str();
}

}  // namespace cdae::metrics
