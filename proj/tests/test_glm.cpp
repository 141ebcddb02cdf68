#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "planlens/eval.hpp"
#include "planlens/glm.hpp"

using namespace planlens;
using featurizer::SparseMatrix;
using glm::FitConfig;
using glm::WeightMode;

namespace {

std::vector<int> labels_242_76() {
  std::vector<int> y(318, 0);
  for (int i = 0; i < 242; ++i) y[i] = 1;
  return y;
}

// n = 200, p = 50, the first five columns drive the label.
oracle::Instance planted_instance() {
  Rng rng(314);
  const std::size_t n = 200, p = 50;
  std::vector<std::vector<double>> rows(n, std::vector<double>(p, 0.0));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = -2.5;
    for (std::size_t j = 0; j < p; ++j) {
      if (rng.uniform() < 0.3) rows[i][j] = rng.uniform();
      if (j < 5) eta += 4.0 * rows[i][j];
    }
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-4.0 * eta)) ? 1 : 0;
  }
  oracle::Instance inst;
  inst.x = SparseMatrix::from_dense(rows);
  inst.y = y;
  inst.weights = glm::class_weights(y, WeightMode::balanced).per_sample;
  return inst;
}

}  // namespace

TEST_CASE("class weights") {
  const auto y = labels_242_76();
  const auto bal = glm::class_weights(y, WeightMode::balanced).per_sample;
  CHECK(bal.front() == doctest::Approx(0.6570).epsilon(1e-4));
  CHECK(bal.back() == doctest::Approx(2.0921).epsilon(1e-4));
  const auto lit = glm::class_weights(y, WeightMode::literal).per_sample;
  CHECK(lit.front() == doctest::Approx(0.7610).epsilon(1e-4));
  CHECK(lit.back() == doctest::Approx(0.2390).epsilon(1e-4));
  const std::vector<int> two{0, 1};
  CHECK(glm::class_weights(two, WeightMode::balanced).per_sample == std::vector<double>{1, 1});
  const std::vector<int> one_class{1, 1};
  CHECK_THROWS_AS(glm::class_weights(one_class, WeightMode::balanced), InputError);
}

TEST_CASE("objective special values") {
  FitConfig cfg;
  cfg.weight_mode = WeightMode::uniform;
  const auto x = SparseMatrix::from_dense({{1, 0}, {0, 2}, {3, 1}, {0, 0}, {1, 1}});
  const std::vector<int> y{1, 0, 1, 0, 0};
  const std::vector<double> zero{0, 0};
  CHECK(glm::objective(0, zero, x, y, cfg) == doctest::Approx(5 * std::log(2.0)).epsilon(1e-15));

  const auto far = SparseMatrix::from_dense({{1000}});
  const std::vector<int> pos{1};
  const std::vector<double> one{1.0}, w{1.0};
  const double tiny = glm::objective(0, one, far, pos, w, 0.0);
  CHECK(tiny >= 0.0);
  CHECK(tiny < 1e-300);
  const std::vector<double> minus{-1.0};
  CHECK(glm::objective(0, minus, far, pos, w, 0.0) == doctest::Approx(1000.0));
}

TEST_CASE("objective matches extended-precision summation") {
  oracle::Instance inst;
  inst.x = SparseMatrix::from_dense({{0.5, 1.0}, {2.0, 0.0}, {0.0, 0.25}, {1.5, 3.0}});
  inst.y = {1, 0, 0, 1};
  inst.weights = {0.7, 1.3, 1.1, 0.9};
  inst.lambda = 0.37;
  const std::vector<double> beta{0.8, -1.2};
  const double got = glm::objective(0.3, beta, inst.x, inst.y, inst.weights, inst.lambda);
  CHECK(std::abs(got - static_cast<double>(oracle::objective_ld(inst, 0.3, beta))) <= 1e-12);
}

TEST_CASE("gradient agrees with finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = oracle::random_instance(rng, 5 + rng.below(20), 1 + rng.below(6));
    std::vector<double> beta(inst.x.n_cols());
    for (double& b : beta) b = 2.0 * (rng.uniform() - 0.5);
    CHECK(oracle::gradient_error(inst, rng.uniform() - 0.5, beta) < 1e-6);
  }
}

TEST_CASE("lambda above lambda_max gives the intercept-only model") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = oracle::random_instance(rng, 30, 6);
    FitConfig cfg;
    cfg.lambda = glm::lambda_max(inst.x, inst.y, cfg.weight_mode) * (1.0 + 0.5 * trial);
    const auto fit = glm::fit(inst.x, inst.y, cfg);
    CHECK(fit.nnz() == 0);
    CHECK(std::abs(fit.intercept - glm::weighted_log_odds(inst.y, inst.weights)) <= 1e-9);
  }

  const SparseMatrix zeros(4, 2);
  const std::vector<int> y{1, 1, 1, 0};
  FitConfig cfg;
  cfg.weight_mode = WeightMode::uniform;
  cfg.lambda = 0.1;
  const auto fit = glm::fit(zeros, y, cfg);
  CHECK(fit.nnz() == 0);
  CHECK(std::abs(fit.intercept - std::log(3.0)) <= 1e-9);
}

TEST_CASE("predict_proba") {
  glm::ModelFit m;
  m.coefficients = {0.0, 0.0};
  const auto x = SparseMatrix::from_dense({{1, 2}, {0, 0}});
  CHECK(glm::predict_proba(m, x) == std::vector<double>{0.5, 0.5});
  m.intercept = std::log(3.0);
  for (double p : glm::predict_proba(m, x)) CHECK(p == doctest::Approx(0.75).epsilon(1e-15));
  m.intercept = -40.0;
  const double p = glm::predict_proba(m, x)[0];
  CHECK(p > 0.0);
  CHECK(p == doctest::Approx(4.248354255291589e-18).epsilon(1e-12));
  CHECK(glm::predict(m, x) == std::vector<int>{0, 0});
}

TEST_CASE("descent is monotone and the KKT certificate holds") {
  Rng rng(41);
  for (int trial = 0; trial < 15; ++trial) {
    auto inst = oracle::random_instance(rng, 20 + rng.below(60), 2 + rng.below(15), 0.4);
    FitConfig cfg;
    cfg.record_trace = true;
    cfg.lambda = glm::lambda_max(inst.x, inst.y, cfg.weight_mode) * (0.02 + 0.3 * rng.uniform());
    const auto fit = glm::fit(inst.x, inst.y, cfg);
    REQUIRE(fit.converged);
    REQUIRE(fit.objective_trace.size() >= 1);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
      // Objective values are recomputed from scratch, so allow rounding.
      CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] * (1.0 + 1e-14));
    }
    const double independent = glm::kkt_residual(fit.intercept, fit.coefficients, inst.x, inst.y, cfg);
    CHECK(independent <= cfg.tol);
    CHECK(fit.kkt_residual <= cfg.tol);
  }
}

TEST_CASE("solver reaches the grid minimum on small problems") {
  Rng rng(2718);
  for (int trial = 0; trial < 6; ++trial) {
    auto inst = oracle::random_instance(rng, 8 + rng.below(13), 1 + rng.below(2));
    inst.lambda = 0.05 + rng.uniform();
    FitConfig cfg;
    cfg.lambda = inst.lambda;
    const auto fit = glm::fit(inst.x, inst.y, inst.weights, cfg);
    const auto check = oracle::grid_check(inst, fit, 6);
    CHECK(check.solver <= check.grid_min + 1e-6);
    CHECK(check.lower_bound >= check.solver - 1e-6);
  }
}

TEST_CASE("label flip symmetry") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = oracle::random_instance(rng, 25, 4);
    std::vector<int> flipped(inst.y.size());
    for (std::size_t i = 0; i < inst.y.size(); ++i) flipped[i] = 1 - inst.y[i];
    std::vector<double> beta(4), neg(4);
    for (std::size_t j = 0; j < 4; ++j) {
      beta[j] = rng.uniform() - 0.5;
      neg[j] = -beta[j];
    }
    FitConfig cfg;
    cfg.weight_mode = WeightMode::uniform;
    cfg.lambda = 0.3;
    CHECK(glm::objective(0.4, beta, inst.x, inst.y, cfg) ==
          doctest::Approx(glm::objective(-0.4, neg, inst.x, flipped, cfg)).epsilon(1e-13));
  }
}

TEST_CASE("path sparsity is monotone") {
  const auto inst = planted_instance();
  FitConfig cfg;
  const auto grid = eval::lambda_grid(inst.x, inst.y, cfg.weight_mode, 30, 1e-3);
  const auto path = glm::fit_path(inst.x, inst.y, cfg, grid);
  CHECK(path.front().nnz() == 0);
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (grid[k] >= 1e-2 * grid.front()) {
      CHECK(path[k].nnz() >= path[k - 1].nnz());
    } else if (path[k].nnz() < path[k - 1].nnz()) {
      // Lasso supports can shrink deep in the path; confirm against a cold tight fit.
      FitConfig tight = cfg;
      tight.lambda = grid[k];
      tight.tol = 1e-12;
      CHECK(glm::fit(inst.x, inst.y, tight).nnz() == path[k].nnz());
    }
  }
}

TEST_CASE("planted support is recovered with a cross-validated lambda") {
  const auto inst = planted_instance();
  FitConfig cfg;
  const auto grid = eval::lambda_grid(inst.x, inst.y, cfg.weight_mode, 20, 1e-2);
  const auto sel = eval::select_lambda_loocv(inst.x, inst.y, cfg, grid);
  const auto& fit = sel.path[sel.index];
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(fit.coefficients[j]) > 0.0);
  std::size_t null_zero = 0;
  for (std::size_t j = 5; j < 50; ++j) null_zero += fit.coefficients[j] == 0.0;
  CHECK(null_zero >= 41);  // at least 90% of the 45 null columns
}

TEST_CASE("warm starts reach the same optimum") {
  Rng rng(77);
  auto inst = oracle::random_instance(rng, 60, 10, 0.5);
  FitConfig cfg;
  cfg.tol = 1e-10;
  cfg.lambda = glm::lambda_max(inst.x, inst.y, cfg.weight_mode) * 0.05;
  const auto cold = glm::fit(inst.x, inst.y, cfg);
  FitConfig looser = cfg;
  looser.lambda *= 3;
  const auto start = glm::fit(inst.x, inst.y, looser);
  const auto warm = glm::fit(inst.x, inst.y, cfg, &start);
  CHECK(warm.objective_value == doctest::Approx(cold.objective_value).epsilon(1e-12));
}

TEST_CASE("standardized fits report original-scale coefficients") {
  Rng rng(12);
  auto inst = oracle::random_instance(rng, 40, 3);
  FitConfig cfg;
  cfg.standardize = true;
  cfg.lambda = 0.01;
  const auto fit = glm::fit(inst.x, inst.y, cfg);
  CHECK(fit.converged);
  const auto p = glm::predict_proba(fit, inst.x);
  for (double v : p) CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("config validation") {
  FitConfig cfg;
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.lambda = 1;
  cfg.tol = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK(glm::parse_weight_mode("literal") == WeightMode::literal);
  CHECK_THROWS_AS(glm::parse_weight_mode("bogus"), InputError);
}
