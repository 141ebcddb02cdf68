#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "planlens/featurizer.hpp"

// Class-weighted L1-regularized logistic regression.
//
// Minimizes  lambda * ||beta||_1 + sum_i c_i * log(1 + exp(-s_i (x_i . beta + beta0)))
// with s_i = 2 y_i - 1, by cyclic coordinate descent. Coefficient steps
// minimize a quadratic majorizer whose curvature is taken over a trust region
// of margins (never above 0.25 * sum_i c_i x_ij^2) and soft-threshold; the
// unpenalized intercept takes safeguarded Newton steps. Once the sign pattern
// settles, damped Newton steps on the nonzero coefficients finish the fit.
namespace planlens::glm {

using featurizer::SparseMatrix;

enum class WeightMode {
  balanced,     // c_i = n / (2 n_{y_i})
  literal,  // c_i = n_{y_i} / n
  uniform,      // c_i = 1
};

std::string to_string(WeightMode mode);
WeightMode parse_weight_mode(const std::string& s);

struct FitConfig {
  double lambda = 0.0;
  WeightMode weight_mode = WeightMode::balanced;
  int max_iters = 10000;  // coordinate sweeps
  double tol = 1e-7;      // on the KKT residual
  bool penalize_intercept = false;
  /// Scale columns to unit standard deviation before fitting; coefficients
  /// are reported on the original scale.
  bool standardize = false;
  /// Record the objective after every sweep in ModelFit::objective_trace.
  bool record_trace = false;

  void validate() const;
};

struct ClassWeights {
  std::vector<double> per_sample;
};

struct ModelFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  double lambda = 0.0;
  WeightMode weight_mode = WeightMode::balanced;
  double objective_value = 0.0;
  int n_iters = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;

  std::size_t nnz() const;
};

ClassWeights class_weights(std::span<const int> labels, WeightMode mode);

/// Penalized objective with explicit per-sample weights.
double objective(double intercept, std::span<const double> beta, const SparseMatrix& x,
                 std::span<const int> y, std::span<const double> weights, double lambda,
                 bool penalize_intercept = false);
/// Penalized objective with weights derived from cfg.weight_mode.
double objective(double intercept, std::span<const double> beta, const SparseMatrix& x,
                 std::span<const int> y, const FitConfig& cfg);

/// Gradient of the smooth (loss) part: element 0 is d/d intercept, element
/// j + 1 is d/d beta_j.
std::vector<double> smooth_gradient(double intercept, std::span<const double> beta,
                                    const SparseMatrix& x, std::span<const int> y,
                                    std::span<const double> weights);

/// Optimality violation of (intercept, beta) at cfg.lambda, computed from
/// scratch: |g_j + lambda sign(beta_j)| for nonzero beta_j, otherwise
/// max(0, |g_j| - lambda); the unpenalized intercept contributes |g_0|.
double kkt_residual(double intercept, std::span<const double> beta, const SparseMatrix& x,
                    std::span<const int> y, const FitConfig& cfg);

/// Smallest lambda at which the all-zero coefficient vector is optimal.
double lambda_max(const SparseMatrix& x, std::span<const int> y, WeightMode mode);

/// Weighted log-odds log(pbar / (1 - pbar)), pbar = sum c_i y_i / sum c_i.
double weighted_log_odds(std::span<const int> y, std::span<const double> weights);

ModelFit fit(const SparseMatrix& x, std::span<const int> y, const FitConfig& cfg,
             const ModelFit* warm_start = nullptr);
/// As fit, with per-sample weights given instead of derived from cfg.weight_mode.
ModelFit fit(const SparseMatrix& x, std::span<const int> y, std::span<const double> weights,
             const FitConfig& cfg, const ModelFit* warm_start = nullptr);

/// Fits a decreasing sequence of lambdas, each warm-started from the last.
std::vector<ModelFit> fit_path(const SparseMatrix& x, std::span<const int> y,
                               const FitConfig& cfg, std::span<const double> lambdas);

std::vector<double> predict_proba(const ModelFit& model, const SparseMatrix& x);
/// Class 1 when the probability is at least 0.5.
std::vector<int> predict(const ModelFit& model, const SparseMatrix& x);

nlohmann::json to_json(const ModelFit& model, std::span<const std::string> terms);

}  // namespace planlens::glm
