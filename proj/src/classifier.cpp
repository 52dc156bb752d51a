#include "cdae/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae::go {

AnnotationTable AnnotationTable::parse_tsv(const std::string& text) {
  std::map<std::string, std::set<std::string>> sets;
  std::size_t line_no = 0;
  for (const auto& raw : io::split_lines(text)) {
    ++line_no;
    const std::string line = io::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = io::split(raw, '\t');
    if (cols.size() != 2 || io::trim(cols[0]).empty() || io::trim(cols[1]).empty()) {
      throw DataError("annotation line " + std::to_string(line_no) +
                      ": expected category_id<TAB>gene_id");
    }
    sets[io::trim(cols[0])].insert(io::trim(cols[1]));
  }
  AnnotationTable table;
  for (auto& [cat, genes] : sets) table.categories[cat].assign(genes.begin(), genes.end());
  return table;
}

AnnotationTable AnnotationTable::load_tsv(const std::filesystem::path& path) {
  return parse_tsv(io::read_file(path));
}

std::string AnnotationTable::to_tsv() const {
  std::ostringstream os;
  os << "# category_id\tgene_id\n";
  for (const auto& [cat, genes] : categories)
    for (const auto& g : genes) os << cat << '\t' << g << '\n';
  return os.str();
}

std::vector<std::string> AnnotationTable::restrict_to(std::span<const std::string> universe) {
  const std::unordered_set<std::string> known(universe.begin(), universe.end());
  std::set<std::string> unknown;
  for (auto& [cat, genes] : categories) {
    std::erase_if(genes, [&](const std::string& g) {
      if (known.count(g)) return false;
      unknown.insert(g);
      return true;
    });
  }
  std::vector<std::string> warnings;
  for (const auto& g : unknown) warnings.push_back("unknown gene id skipped: " + g);
  return warnings;
}

std::vector<std::string> AnnotationTable::filter_sizes(std::size_t min_positives,
                                                       std::size_t max_positives) {
  std::vector<std::string> warnings;
  for (auto it = categories.begin(); it != categories.end();) {
    const std::size_t n = it->second.size();
    if (n < min_positives || n > max_positives) {
      warnings.push_back("category " + it->first + " skipped: " + std::to_string(n) +
                         " positives outside [" + std::to_string(min_positives) + "," +
                         std::to_string(max_positives) + "]");
      it = categories.erase(it);
    } else {
      ++it;
    }
  }
  return warnings;
}

FoldPlan make_folds(std::span<const std::size_t> positives, std::span<const std::size_t> negatives,
                    std::size_t k, Rng& rng) {
  if (k < 2) throw ConfigError("make_folds: need at least 2 folds");
  if (positives.size() < k) {
    throw ConfigError("make_folds: " + std::to_string(positives.size()) + " positives for " +
                      std::to_string(k) + " folds");
  }
  if (negatives.size() < k) {
    throw ConfigError("make_folds: " + std::to_string(negatives.size()) + " negatives for " +
                      std::to_string(k) + " folds");
  }
  std::vector<std::size_t> pos(positives.begin(), positives.end());
  std::vector<std::size_t> neg(negatives.begin(), negatives.end());
  rng.shuffle(std::span<std::size_t>(pos));
  rng.shuffle(std::span<std::size_t>(neg));
  FoldPlan plan;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < pos.size(); ++i) plan.folds[i % k].positives.push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i) plan.folds[i % k].negatives.push_back(neg[i]);
  return plan;
}

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const Matrix& x, std::span<const int> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("logreg: rows of X and labels differ");
  if (!x.allFinite()) throw DataError("logreg: non-finite feature value");
}

}  // namespace

double logreg_objective(const Matrix& x, std::span<const int> y, const Vector& w, double b,
                        double lambda, Vector* grad_w, double* grad_b) {
  check_inputs(x, y);
  const Eigen::Index n = x.rows();
  const Vector z = (x * w).array() + b;
  double loss = 0.0;
  Vector residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    residual[i] = sigmoid(z[i]) - y[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_w) *grad_w = x.transpose() * residual * inv_n + lambda * w;
  if (grad_b) *grad_b = residual.sum() * inv_n;
  return loss * inv_n + 0.5 * lambda * w.squaredNorm();
}

LogRegModel train_logreg(const Matrix& x, std::span<const int> y, double lambda,
                         const LogRegOptions& options) {
  check_inputs(x, y);
  if (!(lambda >= 0.0)) throw ConfigError("logreg: lambda must be non-negative");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == 0) has_neg = true;
    else throw DataError("logreg: labels must be 0 or 1");
  }
  if (!has_pos || !has_neg) throw DataError("logreg: degenerate labels, both classes are required");

  const Eigen::Index n = x.rows(), d = x.cols();
  LogRegModel model{Vector::Zero(d), 0.0, lambda, 0, false};
  Vector gw;
  double gb = 0.0;
  double f = logreg_objective(x, y, model.weights, model.bias, lambda, &gw, &gb);
  double gd_step = 1.0;

  for (int it = 0; it < options.max_iterations; ++it) {
    const double gnorm = std::max(gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0, std::abs(gb));
    if (gnorm < options.gradient_tolerance) {
      model.converged = true;
      break;
    }
    model.iterations = it + 1;

    Vector dir(d + 1);
    bool newton = false;
    if (options.solver == Solver::kNewton) {
      const Vector z = (x * model.weights).array() + model.bias;
      Vector s(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(z[i]);
        s[i] = p * (1.0 - p) / static_cast<double>(n);
      }
      Matrix xa(n, d + 1);
      xa.leftCols(d) = s.cwiseSqrt().asDiagonal() * x;
      xa.col(d) = s.cwiseSqrt();
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d + 1, d + 1);
      h.selfadjointView<Eigen::Lower>().rankUpdate(xa.transpose());
      for (Eigen::Index j = 0; j < d; ++j) h(j, j) += lambda;
      Vector g(d + 1);
      g << gw, gb;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h.selfadjointView<Eigen::Lower>());
      if (ldlt.info() == Eigen::Success) {
        dir = ldlt.solve(-g);
        newton = dir.allFinite() && dir.dot(g) < 0.0;
      }
    }
    if (!newton) dir << -gw, -gb;

    const double slope = dir.head(d).dot(gw) + dir[d] * gb;
    double t = newton ? 1.0 : std::min(gd_step * 2.0, 1e6);
    bool accepted = false;
    Vector w_new;
    double b_new = 0.0, f_new = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      w_new = model.weights + t * dir.head(d);
      b_new = model.bias + t * dir[d];
      f_new = logreg_objective(x, y, w_new, b_new, lambda);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no decrease representable in floating point
    if (!newton) gd_step = t;
    model.weights = std::move(w_new);
    model.bias = b_new;
    f = logreg_objective(x, y, model.weights, model.bias, lambda, &gw, &gb);
  }
  if (!model.converged) {
    const double gnorm = std::max(gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0, std::abs(gb));
    model.converged = gnorm < options.gradient_tolerance;
  }
  return model;
}

double predict_proba(const LogRegModel& model, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(model.weights.size())) {
    throw ShapeError("predict_proba: model has " + std::to_string(model.weights.size()) +
                     " weights, got " + std::to_string(features.size()) + " features");
  }
  double z = model.bias;
  for (std::size_t i = 0; i < features.size(); ++i) z += model.weights[static_cast<Eigen::Index>(i)] * features[i];
  return sigmoid(z);
}

Vector predict_proba(const LogRegModel& model, const Matrix& x) {
  if (x.cols() != model.weights.size()) throw ShapeError("predict_proba: feature dimension mismatch");
  Vector z = (x * model.weights).array() + model.bias;
  for (auto& v : z) v = sigmoid(v);
  return z;
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().sum().transpose() / n;
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out = x.rowwise() - mean.transpose();
  return out * scale.cwiseInverse().asDiagonal();
}

namespace {

Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

struct Split {
  std::vector<std::size_t> train_pos, train_neg, test_rows, train_rows;
  std::vector<int> train_labels, test_labels;
};

Split split_fold(const FoldPlan& plan, std::size_t test) {
  Split s;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    if (f == test) {
      for (auto i : fold.positives) { s.test_rows.push_back(i); s.test_labels.push_back(1); }
      for (auto i : fold.negatives) { s.test_rows.push_back(i); s.test_labels.push_back(0); }
    } else {
      s.train_pos.insert(s.train_pos.end(), fold.positives.begin(), fold.positives.end());
      s.train_neg.insert(s.train_neg.end(), fold.negatives.begin(), fold.negatives.end());
    }
  }
  for (auto i : s.train_pos) { s.train_rows.push_back(i); s.train_labels.push_back(1); }
  for (auto i : s.train_neg) { s.train_rows.push_back(i); s.train_labels.push_back(0); }
  return s;
}

double fit_and_score(const Matrix& x, const Split& s, double lambda, const LogRegOptions& opts) {
  const Matrix train = take_rows(x, s.train_rows);
  const auto scaler = Standardizer::fit(train);
  const auto model = train_logreg(scaler.apply(train), s.train_labels, lambda, opts);
  const Vector p = predict_proba(model, scaler.apply(take_rows(x, s.test_rows)));
  return metrics::roc_auc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                          s.test_labels);
}

}  // namespace

metrics::CategoryResult tune_and_evaluate_category(const Matrix& representations,
                                                   std::span<const std::size_t> positives,
                                                   Rng& rng, const CvOptions& options) {
  if (options.lambda_grid.empty()) throw ConfigError("empty lambda grid");
  std::vector<double> grid = options.lambda_grid;
  std::sort(grid.begin(), grid.end());

  const auto n = static_cast<std::size_t>(representations.rows());
  std::vector<char> is_pos(n, 0);
  for (auto p : positives) {
    if (p >= n) throw ShapeError("positive index outside the representation set");
    is_pos[p] = 1;
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (is_pos[i] ? pos : neg).push_back(i);

  const FoldPlan outer = make_folds(pos, neg, options.folds, rng);
  metrics::CategoryResult result;
  for (std::size_t f = 0; f < outer.folds.size(); ++f) {
    const Split split = split_fold(outer, f);

    // Inner CV on the outer training set only.
    const std::size_t inner_k = std::min(options.folds, split.train_pos.size());
    Rng inner_rng = rng.derive(f);
    const FoldPlan inner = make_folds(split.train_pos, split.train_neg, inner_k, inner_rng);
    double best_lambda = grid.front();
    double best_auc = -1.0;
    for (double lambda : grid) {
      double acc = 0.0;
      for (std::size_t i = 0; i < inner.folds.size(); ++i) {
        acc += fit_and_score(representations, split_fold(inner, i), lambda, options.logreg);
      }
      const double mean_auc = acc / static_cast<double>(inner.folds.size());
      if (mean_auc > best_auc) {
        best_auc = mean_auc;
        best_lambda = lambda;
      }
    }
    result.fold_lambda.push_back(best_lambda);
    result.fold_auc.push_back(fit_and_score(representations, split, best_lambda, options.logreg));
  }
  return result;
}

metrics::AucReport evaluate_all(const Matrix& representations,
                                std::span<const std::string> gene_ids,
                                const AnnotationTable& table, std::uint64_t seed,
                                const CvOptions& options) {
  if (static_cast<std::size_t>(representations.rows()) != gene_ids.size()) {
    throw ShapeError("evaluate_all: representation rows and gene ids differ");
  }
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < gene_ids.size(); ++i) row_of.emplace(gene_ids[i], i);

  metrics::AucReport report;
  struct Job {
    std::string id;
    std::vector<std::size_t> rows;
  };
  std::vector<Job> jobs;
  for (const auto& [cat, genes] : table.categories) {
    Job job{cat, {}};
    for (const auto& g : genes) {
      auto it = row_of.find(g);
      if (it == row_of.end()) {
        report.warnings.push_back("category " + cat + ": unknown gene id " + g + " ignored");
      } else {
        job.rows.push_back(it->second);
      }
    }
    if (job.rows.size() < options.folds) {
      report.warnings.push_back("category " + cat + " skipped: " + std::to_string(job.rows.size()) +
                                " positives, need at least " + std::to_string(options.folds));
      continue;
    }
    jobs.push_back(std::move(job));
  }

  const Rng root(seed);
  std::vector<metrics::CategoryResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
    try {
      Rng rng = root.derive("category:" + jobs[j].id);
      results[j] = tune_and_evaluate_category(representations, jobs[j].rows, rng, options);
      results[j].category_id = jobs[j].id;
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.categories = std::move(results);
  return report;
}

}  // namespace cdae::go
