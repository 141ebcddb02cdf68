#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "planlens/corpus.hpp"

namespace planlens::factors {

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
  /// Columns with zero variance; their off-diagonal correlations are 0.
  std::vector<std::string> zero_variance;

  bool degenerate() const { return !zero_variance.empty(); }
};

/// Pearson correlations between the columns of an n x p matrix, n >= 3.
CorrelationMatrix topic_correlations(const Eigen::MatrixXd& data,
                                     std::vector<std::string> labels);

enum class Extraction { principal_axis, principal_components };
enum class Rotation { varimax, none };

std::string to_string(Extraction e);
Extraction parse_extraction(const std::string& s);
std::string to_string(Rotation r);
Rotation parse_rotation(const std::string& s);

struct FactorOptions {
  Extraction extraction = Extraction::principal_axis;
  Rotation rotation = Rotation::varimax;
  int max_iters = 200;
  double tol = 1e-6;
  double varimax_tol = 1e-8;
  /// Communalities at or below this level count as no shared variance.
  double eigen_floor = 1e-6;
};

inline constexpr int kFactorCount = 2;

struct FactorModel {
  std::vector<std::string> labels;
  /// p x 2; column 0 is Ecology, column 1 Infrastructure.
  Eigen::MatrixXd loadings;
  Eigen::VectorXd communalities;
  Eigen::VectorXd uniquenesses;
  std::vector<std::string> factor_names{"ecology", "infrastructure"};
  Eigen::MatrixXd correlation;
  FactorOptions options;
  int iterations = 0;
  bool converged = true;
  /// Variables whose communality exceeded 1 and was clamped.
  std::vector<std::string> heywood;
  bool no_factor_structure = false;

  /// Largest |R - (L L' + diag(u))|.
  double reproduction_residual() const;
};

/// Two-factor model: principal-axis factoring from squared multiple
/// correlations (or principal components), then optional normalized varimax.
/// Each factor is signed so its largest-|loading| variable is positive; the
/// factor loading more on pollution/waste, land use, climate impacts and
/// offsets is named Ecology.
FactorModel fit_factor_model(const CorrelationMatrix& r, const FactorOptions& options = {});

/// Kaiser-normalized varimax; returns the rotated loadings.
Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings, double tol = 1e-8,
                        int max_iters = 1000);

enum class Quadrant { I, II, III, IV };
std::string to_string(Quadrant q);
/// (+,+) II, (-,+) I, (-,-) III, (+,-) IV; a zero score counts as negative.
Quadrant quadrant(double ecology, double infrastructure);

struct FactorScore {
  std::string city_id;
  double ecology = 0.0;
  double infrastructure = 0.0;
  Quadrant quadrant = Quadrant::III;
};

struct ScoreResult {
  std::vector<FactorScore> scores;
  double condition_number = 0.0;
  bool pseudo_inverse = false;
};

/// Regression-method scores Z R^-1 L on column-standardized data.
ScoreResult factor_scores(const FactorModel& model, const Eigen::MatrixXd& data,
                          std::span<const std::string> row_ids);

struct ColumnSummary {
  std::string variable;
  std::size_t n = 0;
  std::optional<double> mean, sd, min, p25, p75, max;
};

struct SummaryTable {
  std::vector<ColumnSummary> columns;
  /// Cities with percent_reduction above 100, kept as given.
  std::vector<std::pair<std::string, double>> flagged_percent_reduction;
};

/// Linear-interpolation percentile of sorted values, q in [0, 1].
double percentile(std::span<const double> sorted, double q);
SummaryTable summary_stats(std::span<const corpus::CityRecord> records);

std::string correlation_csv(const CorrelationMatrix& r);
std::string loadings_csv(const FactorModel& model);
std::string scores_csv(std::span<const FactorScore> scores);
std::string summary_csv(const SummaryTable& table);
nlohmann::json to_json(const FactorModel& model, const ScoreResult& scores,
                       const CorrelationMatrix& r);
/// Minimal scatter plot of the scores with quadrant axes.
std::string scores_svg(std::span<const FactorScore> scores);

}  // namespace planlens::factors
