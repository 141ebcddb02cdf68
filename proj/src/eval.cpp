#include "planlens/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "planlens/common.hpp"
#include "planlens/csv.hpp"

namespace planlens::eval {
namespace {

// Continued fraction for Q(a, x), modified Lentz.
double gamma_q_continued_fraction(double a, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gamma_p_series(double a, double x) {
  constexpr double kEps = 1e-16;
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw InputError("lambda grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0) || !std::isfinite(grid[k])) {
      throw InputError("lambda grid values must be finite and nonnegative");
    }
    if (k > 0 && !(grid[k] < grid[k - 1])) {
      throw InputError("lambda grid must be strictly decreasing");
    }
  }
}

}  // namespace

void SplitPlan::validate() const {
  if (n_splits < 1) throw InputError("n_splits must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("test_fraction must lie strictly between 0 and 1");
  }
}

std::vector<Split> make_splits(std::span<const int> labels, const SplitPlan& plan) {
  plan.validate();
  const std::size_t n = labels.size();
  if (n < 5) throw InputError("need at least 5 samples to split, got " + std::to_string(n));
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(i);

  const auto n_test =
      static_cast<std::size_t>(std::llround(plan.test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) {
    throw InputError("test_fraction " + format_number(plan.test_fraction) +
                     " gives an empty train or test set for n = " + std::to_string(n));
  }
  auto test_pos = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_test) * static_cast<double>(pos.size()) / static_cast<double>(n)));
  if (n_test >= 2) test_pos = std::clamp<std::size_t>(test_pos, 1, n_test - 1);
  std::size_t test_neg = n_test - test_pos;
  if (pos.size() < test_pos + 1 || neg.size() < test_neg + 1) {
    throw InputError("cannot stratify: " + std::to_string(pos.size()) + " positive and " +
                     std::to_string(neg.size()) + " negative samples leave a class absent from "
                     "the training set at test size " + std::to_string(n_test));
  }

  Rng rng(plan.seed);
  std::vector<Split> splits;
  splits.reserve(static_cast<std::size_t>(plan.n_splits));
  for (int s = 0; s < plan.n_splits; ++s) {
    std::vector<std::size_t> p = pos, q = neg;
    rng.shuffle(std::span<std::size_t>(p));
    rng.shuffle(std::span<std::size_t>(q));
    Split split;
    split.test.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(test_pos));
    split.test.insert(split.test.end(), q.begin(), q.begin() + static_cast<std::ptrdiff_t>(test_neg));
    split.train.assign(p.begin() + static_cast<std::ptrdiff_t>(test_pos), p.end());
    split.train.insert(split.train.end(), q.begin() + static_cast<std::ptrdiff_t>(test_neg), q.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

Metrics metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw InternalError("metrics: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_pred[i] == 1 && y_true[i] == 1) ++tp;
    if (y_pred[i] == 1 && y_true[i] == 0) ++fp;
    if (y_pred[i] == 0 && y_true[i] == 1) ++fn;
  }
  Metrics m;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.precision_undefined = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.recall_undefined = true;
  }
  if (m.precision + m.recall > 0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_undefined = true;
  }
  return m;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw InputError("regularized gamma: need a > 0 and x >= 0");
  if (x == 0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw InputError("regularized gamma: need a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_continued_fraction(a, x);
}

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0) return 1.0;
  return regularized_gamma_q(0.5 * dof, 0.5 * statistic);
}

ChiSquare chi_square_term(std::span<const int> presence, std::span<const int> labels,
                          bool yates) {
  if (presence.size() != labels.size()) {
    throw InputError("chi-square: presence has " + std::to_string(presence.size()) +
                     " entries, labels " + std::to_string(labels.size()));
  }
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    table[presence[i] ? 1 : 0][labels[i] ? 1 : 0] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  const double rows[2] = {table[0][0] + table[0][1], table[1][0] + table[1][1]};
  const double cols[2] = {table[0][0] + table[1][0], table[0][1] + table[1][1]};
  ChiSquare out;
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) {
    out.degenerate = true;
    return out;
  }
  double stat = 0.0;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double expected = rows[r] * cols[c] / n;
      double diff = std::abs(table[r][c] - expected);
      if (yates) diff = std::max(0.0, diff - 0.5);
      stat += diff * diff / expected;
    }
  }
  out.statistic = stat;
  out.p_value = chi_square_sf(stat, 1.0);
  return out;
}

std::string to_string(LoocvScoring s) {
  return s == LoocvScoring::accuracy ? "accuracy" : "weighted_accuracy";
}

LoocvScoring parse_loocv_scoring(const std::string& s) {
  if (s == "accuracy") return LoocvScoring::accuracy;
  if (s == "weighted_accuracy") return LoocvScoring::weighted_accuracy;
  throw InputError("unknown LOOCV scoring: " + s + " (expected accuracy or weighted_accuracy)");
}

std::vector<double> lambda_grid(const SparseMatrix& x, std::span<const int> y,
                                glm::WeightMode mode, int points, double ratio) {
  if (points < 1) throw InputError("lambda grid needs at least one point");
  if (!(ratio > 0 && ratio < 1)) throw InputError("lambda grid ratio must lie in (0, 1)");
  const double top = glm::lambda_max(x, y, mode);
  if (top <= 0) return {0.0};
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    grid[static_cast<std::size_t>(k)] = top * std::pow(ratio, t);
  }
  return grid;
}

// Newton estimate of the fit without sample `held`, from the all-sample fit:
// on the active set, beta += c (p - y) H^-1 x / (1 - w x' H^-1 x), where H is
// the loss Hessian of the all-sample fit. Coefficients that would change
// sign are set to zero.
class LeaveOneOutStart {
 public:
  LeaveOneOutStart(const SparseMatrix& x, std::span<const int> y,
                   std::span<const double> c, const glm::ModelFit& full)
      : full_(full) {
    for (std::size_t j = 0; j < full.coefficients.size(); ++j) {
      if (full.coefficients[j] != 0.0) active_.push_back(j);
    }
    const auto a = static_cast<Eigen::Index>(active_.size() + 1);
    design_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.n_rows()), a);
    std::vector<Eigen::Index> slot(full.coefficients.size(), -1);
    for (std::size_t k = 0; k < active_.size(); ++k) slot[active_[k]] = static_cast<Eigen::Index>(k + 1);
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      design_(static_cast<Eigen::Index>(i), 0) = 1.0;
      const auto cols = x.row_cols(i);
      const auto vals = x.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (slot[cols[k]] >= 0) design_(static_cast<Eigen::Index>(i), slot[cols[k]]) = vals[k];
      }
    }
    prob_ = glm::predict_proba(full, x);
    curvature_.resize(x.n_rows());
    Eigen::VectorXd w(static_cast<Eigen::Index>(x.n_rows()));
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      curvature_[i] = c[i] * prob_[i] * (1.0 - prob_[i]);
      w[static_cast<Eigen::Index>(i)] = curvature_[i];
    }
    Eigen::MatrixXd h = design_.transpose() * w.asDiagonal() * design_;
    h.diagonal().array() += 1e-12 * (h.trace() / static_cast<double>(a) + 1e-300);
    solver_.compute(h);
    ok_ = solver_.info() == Eigen::Success;
    c_.assign(c.begin(), c.end());
    y_.assign(y.begin(), y.end());
  }

  glm::ModelFit operator()(std::size_t held) const {
    glm::ModelFit start = full_;
    if (!ok_) return start;
    const auto row = static_cast<Eigen::Index>(held);
    const Eigen::VectorXd xi = design_.row(row).transpose();
    const Eigen::VectorXd u = solver_.solve(xi);
    const double leverage = curvature_[held] * xi.dot(u);
    if (!(leverage < 1.0 - 1e-9)) return start;
    const double scale = c_[held] * (prob_[held] - y_[held]) / (1.0 - leverage);
    if (!std::isfinite(scale)) return start;
    start.intercept += scale * u[0];
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const double before = full_.coefficients[active_[k]];
      const double after = before + scale * u[static_cast<Eigen::Index>(k + 1)];
      start.coefficients[active_[k]] = before * after > 0.0 ? after : 0.0;
    }
    return start;
  }

 private:
  const glm::ModelFit& full_;
  std::vector<std::size_t> active_;
  Eigen::MatrixXd design_;
  std::vector<double> prob_;
  std::vector<double> curvature_;
  std::vector<double> c_;
  std::vector<int> y_;
  Eigen::LDLT<Eigen::MatrixXd> solver_;
  bool ok_ = false;
};

LoocvResult select_lambda_loocv(const SparseMatrix& x, std::span<const int> y,
                                const glm::FitConfig& cfg, std::span<const double> grid,
                                LoocvScoring scoring, int threads) {
  check_grid(grid);
  const std::size_t n = y.size();
  LoocvResult result;
  result.path = glm::fit_path(x, y, cfg, grid);
  // Folds keep the class weights of the whole training partition.
  const auto fit_weights = glm::class_weights(y, cfg.weight_mode).per_sample;
  std::vector<double> score_weights(n, 1.0);
  if (scoring == LoocvScoring::weighted_accuracy) {
    score_weights = glm::class_weights(y, glm::WeightMode::balanced).per_sample;
  }
  double total = 0.0;
  for (double w : score_weights) total += w;

  struct Fold {
    SparseMatrix x;
    SparseMatrix held_out;
    std::vector<int> y;
    std::vector<double> w;
    int only_class = -1;  // set when the fold lacks one class
  };
  std::vector<Fold> folds(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<std::size_t> keep;
    keep.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r) {
      if (r != i) keep.push_back(r);
    }
    Fold& f = folds[i];
    f.x = x.select_rows(keep);
    const std::size_t row[1] = {i};
    f.held_out = x.select_rows(row);
    for (std::size_t r : keep) {
      f.y.push_back(y[r]);
      f.w.push_back(fit_weights[r]);
    }
    const bool has_pos = std::find(f.y.begin(), f.y.end(), 1) != f.y.end();
    const bool has_neg = std::find(f.y.begin(), f.y.end(), 0) != f.y.end();
    if (!has_pos || !has_neg) f.only_class = has_pos ? 1 : 0;
  });

  // Grid points are scored from the largest lambda down. A point is dropped
  // as soon as its held-out error reaches the best error so far: it can no
  // longer win, since ties go to the larger lambda. Folds the full-data fit
  // gets most wrong are scored first, in blocks of fixed size so the result
  // does not depend on the thread count.
  constexpr std::size_t kBlock = 8;
  result.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  double best_error = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  std::vector<char> correct(n);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const glm::ModelFit& full = result.path[k];
    const auto prob = glm::predict_proba(full, x);
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
      order[i] = {y[i] ? prob[i] : 1.0 - prob[i], i};
    }
    std::sort(order.begin(), order.end());

    glm::FitConfig step = cfg;
    step.lambda = grid[k];
    step.record_trace = false;
    const LeaveOneOutStart estimate(x, y, fit_weights, full);
    double error = 0.0;
    bool pruned = false;
    for (std::size_t begin = 0; begin < n && !pruned; begin += kBlock) {
      const std::size_t count = std::min(kBlock, n - begin);
      parallel_for(count, threads, [&](std::size_t b) {
        const std::size_t i = order[begin + b].second;
        const Fold& f = folds[i];
        int guess = f.only_class;
        // With the same weights and lambda, the fold optimum cannot fit the
        // held-out sample better than the all-sample fit does (its loss can
        // only grow), so a sample the full fit misclassifies is a fold error.
        const bool full_wrong = y[i] ? prob[i] < 0.5 : prob[i] >= 0.5;
        if (guess < 0 && full_wrong) guess = 1 - y[i];
        if (guess < 0) {
          // Start from whichever of the all-sample fit and its one-step
          // correction has the lower fold objective.
          const glm::ModelFit corrected = estimate(i);
          const auto objective_at = [&](const glm::ModelFit& m) {
            return glm::objective(m.intercept, m.coefficients, f.x, f.y, f.w, step.lambda,
                                  step.penalize_intercept);
          };
          const glm::ModelFit* start = &full;
          if (objective_at(corrected) < objective_at(full)) start = &corrected;
          const glm::ModelFit model = glm::fit(f.x, f.y, f.w, step, start);
          guess = glm::predict(model, f.held_out)[0];
        }
        correct[i] = guess == y[i];
      });
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t i = order[begin + b].second;
        if (!correct[i]) error += score_weights[i];
      }
      pruned = error >= best_error;
    }
    if (pruned) continue;
    result.scores[k] = 1.0 - error / total;
    best_error = error;
    best = k;
    if (error == 0.0) break;
  }
  result.index = best;
  result.lambda = grid[best];
  return result;
}

std::map<std::string, double> EvaluationReport::term_pvalues() const {
  std::map<std::string, double> out;
  for (const auto& t : predictive_terms) out[t.term] = t.p_value;
  return out;
}

EvaluationReport evaluate_repeated(const SparseMatrix& x, std::span<const int> y,
                                   std::span<const std::string> terms,
                                   const glm::FitConfig& cfg, const EvalOptions& options) {
  cfg.validate();
  if (x.n_rows() != y.size()) throw InternalError("evaluate_repeated: row/label mismatch");
  if (terms.size() != x.n_cols()) throw InternalError("evaluate_repeated: term/column mismatch");
  if (options.fixed_grid) check_grid(*options.fixed_grid);

  // Stratification failures surface here, before any fitting.
  const auto splits = make_splits(y, options.plan);

  struct Outcome {
    SplitResult result;
    std::vector<double> coefficients;
  };
  std::vector<Outcome> outcomes(splits.size());
  parallel_for(splits.size(), options.threads, [&](std::size_t s) {
    const Split& split = splits[s];
    const SparseMatrix train_x = x.select_rows(split.train);
    const SparseMatrix test_x = x.select_rows(split.test);
    std::vector<int> train_y, test_y;
    for (std::size_t r : split.train) train_y.push_back(y[r]);
    for (std::size_t r : split.test) test_y.push_back(y[r]);

    const std::vector<double> grid =
        options.fixed_grid ? *options.fixed_grid
                           : lambda_grid(train_x, train_y, cfg.weight_mode, options.grid_points,
                                         options.grid_ratio);
    LoocvResult sel = select_lambda_loocv(train_x, train_y, cfg, grid, options.scoring, 1);
    const glm::ModelFit& model = sel.path[sel.index];
    const auto pred = glm::predict(model, test_x);

    Outcome& out = outcomes[s];
    out.result.metrics = metrics(test_y, pred);
    out.result.lambda = sel.lambda;
    out.result.nnz = model.nnz();
    out.result.converged = model.converged;
    out.coefficients = model.coefficients;
  });

  EvaluationReport report;
  report.options = options;
  report.terms.assign(terms.begin(), terms.end());
  report.averaged_coefficients.assign(x.n_cols(), 0.0);
  std::vector<double> lambdas;
  for (const Outcome& o : outcomes) {
    report.per_split.push_back(o.result);
    report.mean_precision += o.result.metrics.precision;
    report.mean_recall += o.result.metrics.recall;
    report.mean_f1 += o.result.metrics.f1;
    if (!o.result.converged) ++report.nonconverged_fits;
    lambdas.push_back(o.result.lambda);
    for (std::size_t j = 0; j < x.n_cols(); ++j) {
      report.averaged_coefficients[j] += o.coefficients[j];
    }
  }
  const double count = static_cast<double>(outcomes.size());
  report.mean_precision /= count;
  report.mean_recall /= count;
  report.mean_f1 /= count;
  for (double& b : report.averaged_coefficients) b /= count;
  report.selected_lambda = median(lambdas);

  // Presence of each term across all documents.
  std::vector<std::vector<int>> presence;
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < x.n_cols(); ++j) {
    if (report.averaged_coefficients[j] != 0.0) used.push_back(j);
  }
  std::vector<std::size_t> slot(x.n_cols(), SIZE_MAX);
  for (std::size_t k = 0; k < used.size(); ++k) slot[used[k]] = k;
  presence.assign(used.size(), std::vector<int>(x.n_rows(), 0));
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    for (std::size_t c : x.row_cols(i)) {
      if (slot[c] != SIZE_MAX) presence[slot[c]][i] = 1;
    }
  }
  for (std::size_t k = 0; k < used.size(); ++k) {
    const ChiSquare chi = chi_square_term(presence[k], y, options.yates);
    report.predictive_terms.push_back({report.terms[used[k]],
                                       report.averaged_coefficients[used[k]], chi.statistic,
                                       chi.p_value});
  }
  std::sort(report.predictive_terms.begin(), report.predictive_terms.end(),
            [](const TermStatistic& a, const TermStatistic& b) {
              const double fa = std::abs(a.avg_coefficient), fb = std::abs(b.avg_coefficient);
              return fa != fb ? fa > fb : a.term < b.term;
            });
  return report;
}

nlohmann::json to_json(const EvaluationReport& report, const glm::FitConfig& cfg) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : report.per_split) {
    splits.push_back({{"precision", round12(s.metrics.precision)},
                      {"recall", round12(s.metrics.recall)},
                      {"f1", round12(s.metrics.f1)},
                      {"precision_undefined", s.metrics.precision_undefined},
                      {"recall_undefined", s.metrics.recall_undefined},
                      {"lambda", round12(s.lambda)},
                      {"nnz", s.nnz},
                      {"converged", s.converged}});
  }
  nlohmann::json coefs = nlohmann::json::object();
  nlohmann::json pvalues = nlohmann::json::object();
  for (const auto& t : report.predictive_terms) {
    coefs[t.term] = round12(t.avg_coefficient);
    pvalues[t.term] = round12(t.p_value);
  }
  const auto& o = report.options;
  return {
      {"mean_precision", round12(report.mean_precision)},
      {"mean_recall", round12(report.mean_recall)},
      {"mean_f1", round12(report.mean_f1)},
      {"selected_lambda", round12(report.selected_lambda)},
      {"nonconverged_fits", report.nonconverged_fits},
      {"per_split_metrics", splits},
      {"averaged_coefficients", coefs},
      {"term_pvalues", pvalues},
      {"settings",
       {{"seed", o.plan.seed},
        {"n_splits", o.plan.n_splits},
        {"test_fraction", o.plan.test_fraction},
        {"lambda_grid_points", o.grid_points},
        {"lambda_grid_ratio", o.grid_ratio},
        {"loocv_scoring", to_string(o.scoring)},
        {"chi_square_yates", o.yates},
        {"weight_mode", glm::to_string(cfg.weight_mode)},
        {"penalize_intercept", cfg.penalize_intercept},
        {"standardize", cfg.standardize},
        {"tol", cfg.tol},
        {"max_iters", cfg.max_iters}}}};
}

std::string predictive_terms_csv(const EvaluationReport& report) {
  std::string out = "term,avg_coefficient,p_value\n";
  for (const auto& t : report.predictive_terms) {
    out += csv::join({t.term, format_number(t.avg_coefficient), format_number(t.p_value)});
  }
  return out;
}

}  // namespace planlens::eval
