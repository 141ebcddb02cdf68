#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "planlens/glm.hpp"

namespace planlens::eval {

using featurizer::SparseMatrix;

struct SplitPlan {
  std::uint64_t seed = 0;
  int n_splits = 50;
  double test_fraction = 0.2;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;  // sorted
  std::vector<std::size_t> test;   // sorted
};

/// Stratified random train/test partitions, drawn from one generator seeded
/// with plan.seed. Each test set has round(test_fraction * n) samples with
/// both classes whenever that size allows; each training set keeps at least
/// one sample of each class.
std::vector<Split> make_splits(std::span<const int> labels, const SplitPlan& plan);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding ratio was 0/0 and reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Binary precision, recall and F1 for the positive class 1.
Metrics metrics(std::span<const int> y_true, std::span<const int> y_pred);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

struct ChiSquare {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // a zero row or column margin
};

/// Pearson chi-square test of independence on the 2x2 table of term presence
/// against label, one degree of freedom.
ChiSquare chi_square_term(std::span<const int> presence, std::span<const int> labels,
                          bool yates = false);

enum class LoocvScoring { accuracy, weighted_accuracy };
std::string to_string(LoocvScoring s);
LoocvScoring parse_loocv_scoring(const std::string& s);

/// `points` log-spaced values from lambda_max down to lambda_max * ratio.
std::vector<double> lambda_grid(const SparseMatrix& x, std::span<const int> y,
                                glm::WeightMode mode, int points = 30, double ratio = 1e-3);

struct LoocvResult {
  double lambda = 0.0;
  std::size_t index = 0;
  /// Held-out accuracy per grid point; NaN where scoring stopped early
  /// because the point could no longer be selected.
  std::vector<double> scores;
  std::vector<glm::ModelFit> path;    // fits on all samples, per grid point
};

/// Leave-one-out selection over a strictly decreasing grid. Returns the
/// lambda with the best held-out score; ties go to the larger lambda. Each
/// fold is warm-started from the all-sample fit at the same lambda and keeps
/// the all-sample class weights.
LoocvResult select_lambda_loocv(const SparseMatrix& x, std::span<const int> y,
                                const glm::FitConfig& cfg, std::span<const double> grid,
                                LoocvScoring scoring = LoocvScoring::accuracy,
                                int threads = 1);

struct EvalOptions {
  SplitPlan plan;
  int grid_points = 30;
  double grid_ratio = 1e-3;
  /// When set, used for every split instead of a per-split grid.
  std::optional<std::vector<double>> fixed_grid;
  LoocvScoring scoring = LoocvScoring::accuracy;
  bool yates = false;
  int threads = 1;
};

struct SplitResult {
  Metrics metrics;
  double lambda = 0.0;
  std::size_t nnz = 0;
  bool converged = true;
};

struct TermStatistic {
  std::string term;
  double avg_coefficient = 0.0;
  double chi_square = 0.0;
  double p_value = 1.0;
};

struct EvaluationReport {
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  std::vector<SplitResult> per_split;
  std::vector<std::string> terms;
  /// Per column, averaged over all split fits (zeros included).
  std::vector<double> averaged_coefficients;
  /// Median of the per-split LOOCV selections.
  double selected_lambda = 0.0;
  /// Terms with a nonzero averaged coefficient, by |coefficient| descending.
  std::vector<TermStatistic> predictive_terms;
  std::size_t nonconverged_fits = 0;
  EvalOptions options;

  std::map<std::string, double> term_pvalues() const;
};

EvaluationReport evaluate_repeated(const SparseMatrix& x, std::span<const int> y,
                                   std::span<const std::string> terms,
                                   const glm::FitConfig& cfg, const EvalOptions& options);

nlohmann::json to_json(const EvaluationReport& report, const glm::FitConfig& cfg);
/// `term,avg_coefficient,p_value`, sorted by |avg_coefficient| descending.
std::string predictive_terms_csv(const EvaluationReport& report);

}  // namespace planlens::eval
