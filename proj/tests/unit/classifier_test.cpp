#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cdae/classifier.hpp"
#include "cdae/errors.hpp"
#include "oracles.hpp"

namespace cdae::go {
namespace {

std::vector<std::size_t> iota(std::size_t from, std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
  return v;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// ---- folds ----

TEST(Folds, EqualSplit) {
  Rng rng(1);
  const auto plan = make_folds(iota(0, 20), iota(20, 100), 5, rng);
  ASSERT_EQ(plan.folds.size(), 5u);
  for (const auto& f : plan.folds) {
    EXPECT_EQ(f.positives.size(), 4u);
    EXPECT_EQ(f.negatives.size(), 20u);
  }
}

TEST(Folds, RemainderGoesToLeadingFolds) {
  Rng rng(2);
  const auto plan = make_folds(iota(0, 17), iota(17, 40), 5, rng);
  std::vector<std::size_t> sizes;
  for (const auto& f : plan.folds) sizes.push_back(f.positives.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 3, 3, 3}));
}

TEST(Folds, PartitionAndDeterminism) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 5 + rng.below(40), n = 5 + rng.below(200);
    const auto pos = iota(1000, p), neg = iota(0, n);
    Rng a(trial), b(trial);
    const auto plan = make_folds(pos, neg, 5, a);
    const auto again = make_folds(pos, neg, 5, b);
    std::multiset<std::size_t> seen_pos, seen_neg;
    for (std::size_t f = 0; f < 5; ++f) {
      seen_pos.insert(plan.folds[f].positives.begin(), plan.folds[f].positives.end());
      seen_neg.insert(plan.folds[f].negatives.begin(), plan.folds[f].negatives.end());
      EXPECT_EQ(plan.folds[f].positives, again.folds[f].positives);
    }
    EXPECT_EQ(seen_pos, std::multiset<std::size_t>(pos.begin(), pos.end()));
    EXPECT_EQ(seen_neg, std::multiset<std::size_t>(neg.begin(), neg.end()));
  }
}

TEST(Folds, TooFewMembersIsConfigError) {
  Rng rng(4);
  EXPECT_THROW(make_folds(iota(0, 4), iota(4, 50), 5, rng), ConfigError);
  EXPECT_THROW(make_folds(iota(0, 10), iota(10, 3), 5, rng), ConfigError);
}

// ---- logistic regression ----

TEST(LogReg, ObjectiveGradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = random_matrix(30, 4, rng);
    std::vector<int> y(30);
    for (auto& v : y) v = rng.uniform() < 0.5;
    Vector w(4);
    for (auto& v : w) v = rng.normal();
    double b = rng.normal();
    const double lambda = 0.3;
    Vector gw;
    double gb = 0;
    logreg_objective(x, y, w, b, lambda, &gw, &gb);

    std::vector<double> params(w.data(), w.data() + 4);
    params.push_back(b);
    auto f = [&] {
      const Vector wp = Eigen::Map<const Vector>(params.data(), 4);
      return logreg_objective(x, y, wp, params[4], lambda);
    };
    const auto numeric = testing::central_differences(params, f);
    std::vector<double> analytic(gw.data(), gw.data() + 4);
    analytic.push_back(gb);
    EXPECT_LT(testing::relative_error(analytic, numeric), 1e-6);
  }
}

TEST(LogReg, ZeroFeaturesBalancedLabelsGiveZeroModel) {
  const Matrix x = Matrix::Zero(6, 3);
  const std::vector<int> y{0, 1, 0, 1, 0, 1};
  const auto m = train_logreg(x, y, 0.1);
  EXPECT_TRUE(m.converged);
  EXPECT_EQ(m.weights, Vector::Zero(3));
  EXPECT_EQ(m.bias, 0.0);
  EXPECT_EQ(predict_proba(m, std::vector<double>{1, 2, 3}), 0.5);
}

TEST(LogReg, RegularizedSeparableDataHasFinitePositiveWeight) {
  Matrix x(2, 1);
  x << -1, 1;
  const auto m = train_logreg(x, std::vector<int>{0, 1}, 1.0);
  EXPECT_TRUE(m.converged);
  EXPECT_TRUE(std::isfinite(m.weights[0]));
  EXPECT_GT(m.weights[0], 0.0);
}

TEST(LogReg, DegenerateInputsAreRejected) {
  const Matrix x = Matrix::Ones(3, 2);
  EXPECT_THROW(train_logreg(x, std::vector<int>{1, 1, 1}, 1.0), DataError);
  Matrix bad = x;
  bad(1, 1) = std::nan("");
  EXPECT_THROW(train_logreg(bad, std::vector<int>{0, 1, 0}, 1.0), DataError);
}

TEST(LogReg, LargerLambdaNeverGrowsWeights) {
  Rng rng(6);
  const Matrix x = random_matrix(60, 5, rng);
  std::vector<int> y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y[i] = x(i, 0) + 0.5 * x(i, 1) + 0.8 * rng.normal() > 0;
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0}) {
    const auto m = train_logreg(x, y, lambda);
    ASSERT_TRUE(m.converged) << lambda;
    EXPECT_LE(m.weights.norm(), previous + 1e-9) << lambda;
    previous = m.weights.norm();
  }
}

TEST(LogReg, FeatureScalingIsAbsorbedWithoutRegularization) {
  Rng rng(7);
  const Matrix x = random_matrix(50, 3, rng);
  std::vector<int> y(50);
  for (Eigen::Index i = 0; i < 50; ++i) y[i] = x(i, 0) - x(i, 2) + 1.5 * rng.normal() > 0;
  Matrix scaled = x;
  scaled.col(1) *= 7.5;
  const auto a = train_logreg(x, y, 0.0);
  const auto b = train_logreg(scaled, y, 0.0);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LT((predict_proba(a, x) - predict_proba(b, scaled)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(b.weights[1] * 7.5, a.weights[1], 1e-5);
}

TEST(LogReg, NewtonAndGradientDescentAgree) {
  Rng rng(8);
  const Matrix x = random_matrix(40, 3, rng);
  std::vector<int> y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y[i] = x(i, 1) + rng.normal() > 0;
  LogRegOptions gd;
  gd.solver = Solver::kGradientDescent;
  gd.gradient_tolerance = 1e-8;
  const auto a = train_logreg(x, y, 0.1);
  const auto b = train_logreg(x, y, 0.1, gd);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LT((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_NEAR(a.bias, b.bias, 1e-5);
}

TEST(LogReg, PredictProbaIsMonotoneAndChecksDimension) {
  LogRegModel m{Vector::Ones(2), 0.0, 0.0, 0, true};
  double last = 0.0;
  for (double t = -40; t <= 40; t += 0.5) {
    const double p = predict_proba(m, std::vector<double>{t, 0.0});
    EXPECT_GE(p, last);
    last = p;
  }
  EXPECT_GT(predict_proba(m, std::vector<double>{30, 30}), 1.0 - 1e-12);
  EXPECT_THROW(predict_proba(m, std::vector<double>{1}), ShapeError);
}

TEST(Standardizer, FitsOnTrainingStatistics) {
  Matrix x(4, 2);
  x << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto s = Standardizer::fit(x);
  const Matrix z = s.apply(x);
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(std::sqrt(z.col(0).squaredNorm() / 4), 1.0, 1e-12);
  EXPECT_EQ(z.col(1), Vector::Zero(4));
}

// ---- nested cross-validation ----

CvOptions fast_cv() {
  CvOptions cv;
  cv.lambda_grid = {1e-2, 1.0, 100.0};
  return cv;
}

TEST(Tuning, PlantedOffsetIsFoundAlmostPerfectly) {
  Rng rng(9);
  Matrix x = random_matrix(150, 6, rng);
  const auto pos = iota(0, 25);
  for (auto p : pos) x(static_cast<Eigen::Index>(p), 2) += 6.0;
  Rng cv_rng(10);
  const auto r = tune_and_evaluate_category(x, pos, cv_rng, fast_cv());
  EXPECT_EQ(r.fold_auc.size(), 5u);
  EXPECT_EQ(r.fold_lambda.size(), 5u);
  EXPECT_GE(r.mean_auc(), 0.99);
}

TEST(Tuning, PermutedLabelsScoreNearChance) {
  Rng rng(11);
  double total = 0.0;
  const int repeats = 8;
  for (int rep = 0; rep < repeats; ++rep) {
    const Matrix x = random_matrix(120, 5, rng);
    std::vector<std::size_t> all = iota(0, 120);
    rng.shuffle(std::span<std::size_t>(all));
    const std::vector<std::size_t> pos(all.begin(), all.begin() + 30);
    Rng cv_rng(100 + rep);
    total += tune_and_evaluate_category(x, pos, cv_rng, fast_cv()).mean_auc();
  }
  EXPECT_NEAR(total / repeats, 0.5, 0.1);
}

TEST(Tuning, IdenticalFeaturesScoreExactlyHalf) {
  const Matrix x = Matrix::Constant(60, 4, 0.7);
  Rng rng(12);
  const auto r = tune_and_evaluate_category(x, iota(0, 15), rng, fast_cv());
  for (double a : r.fold_auc) EXPECT_EQ(a, 0.5);
  for (double l : r.fold_lambda) EXPECT_EQ(l, 1e-2);  // all ties resolve to the smallest lambda
}

TEST(Tuning, SeededRunsRepeat) {
  Rng rng(13);
  Matrix x = random_matrix(80, 3, rng);
  for (std::size_t p = 0; p < 12; ++p) x(static_cast<Eigen::Index>(p), 0) += 1.0;
  Rng a(5), b(5);
  const auto ra = tune_and_evaluate_category(x, iota(0, 12), a, fast_cv());
  const auto rb = tune_and_evaluate_category(x, iota(0, 12), b, fast_cv());
  EXPECT_EQ(ra.fold_auc, rb.fold_auc);
  EXPECT_EQ(ra.fold_lambda, rb.fold_lambda);
}

TEST(EvaluateAll, EmptyTableGivesEmptyReport) {
  const Matrix x = Matrix::Zero(3, 2);
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto r = evaluate_all(x, ids, AnnotationTable{}, 1, fast_cv());
  EXPECT_TRUE(r.categories.empty());
  EXPECT_FALSE(r.overall_mean().has_value());
}

TEST(EvaluateAll, SkipsSmallCategoriesAndKeepsOrder) {
  Rng rng(14);
  Matrix x = random_matrix(100, 4, rng);
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("g" + std::to_string(i));
  AnnotationTable t;
  for (int i = 0; i < 20; ++i) {
    t.categories["GO:b"].push_back(ids[i]);
    x(i, 1) += 4.0;
  }
  for (int i = 50; i < 53; ++i) t.categories["GO:a"].push_back(ids[i]);
  for (int i = 60; i < 80; ++i) t.categories["GO:c"].push_back(ids[i]);
  t.categories["GO:c"].push_back("unknown");

  const auto r = evaluate_all(x, ids, t, 3, fast_cv());
  ASSERT_EQ(r.categories.size(), 2u);
  EXPECT_EQ(r.categories[0].category_id, "GO:b");
  EXPECT_EQ(r.categories[1].category_id, "GO:c");
  EXPECT_GE(r.categories[0].mean_auc(), 0.95);
  EXPECT_EQ(r.warnings.size(), 2u);

  const auto again = evaluate_all(x, ids, t, 3, fast_cv());
  EXPECT_EQ(again.to_csv(), r.to_csv());
}

TEST(EvaluateAll, SingleCategoryOverallEqualsItsMean) {
  Rng rng(15);
  const Matrix x = random_matrix(40, 2, rng);
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("g" + std::to_string(i));
  AnnotationTable t;
  for (int i = 0; i < 10; ++i) t.categories["GO:1"].push_back(ids[i]);
  const auto r = evaluate_all(x, ids, t, 1, fast_cv());
  ASSERT_EQ(r.categories.size(), 1u);
  EXPECT_EQ(*r.overall_mean(), r.categories[0].mean_auc());
}

// ---- annotation files ----

TEST(Annotations, ParseRestrictAndFilter) {
  auto t = AnnotationTable::parse_tsv("# header\nGO:1\tg1\nGO:1\tg2\nGO:1\tg1\n\nGO:2\tg3\nGO:2\tgX\n");
  EXPECT_EQ(t.categories["GO:1"], (std::vector<std::string>{"g1", "g2"}));
  const std::vector<std::string> universe{"g1", "g2", "g3"};
  EXPECT_EQ(t.restrict_to(universe).size(), 1u);
  EXPECT_EQ(t.categories["GO:2"], (std::vector<std::string>{"g3"}));
  EXPECT_EQ(t.filter_sizes(2, 10).size(), 1u);
  EXPECT_EQ(t.categories.size(), 1u);
  EXPECT_EQ(AnnotationTable::parse_tsv(t.to_tsv()).categories, t.categories);
  EXPECT_THROW(AnnotationTable::parse_tsv("GO:1 g1\n"), DataError);
}

}  // namespace
}  // namespace cdae::go
