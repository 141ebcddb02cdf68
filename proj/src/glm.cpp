#include "planlens/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "planlens/common.hpp"

namespace planlens::glm {
namespace {

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double v) {
  return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Largest logistic curvature p(1-p) over margins within `radius` of eta,
// given tail = exp(-|eta|) and grow = exp(radius).
double max_curvature(double tail, double grow) {
  const double u = tail * grow;
  if (u >= 1.0) return 0.25;
  return u / ((1.0 + u) * (1.0 + u));
}

void check_dims(const SparseMatrix& x, std::span<const int> y) {
  if (x.n_rows() != y.size()) {
    throw InternalError("design matrix has " + std::to_string(x.n_rows()) +
                        " rows but there are " + std::to_string(y.size()) + " labels");
  }
}

std::vector<double> margins(double intercept, std::span<const double> beta,
                            const SparseMatrix& x) {
  if (beta.size() != x.n_cols()) {
    throw InternalError("coefficient vector has " + std::to_string(beta.size()) +
                        " entries, matrix has " + std::to_string(x.n_cols()) + " columns");
  }
  std::vector<double> eta(x.n_rows(), intercept);
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    const auto cols = x.row_cols(i);
    const auto vals = x.row_values(i);
    double s = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) s += vals[k] * beta[cols[k]];
    eta[i] += s;
  }
  return eta;
}

// Column-major copy of the design matrix.
struct ColumnMajor {
  std::vector<std::size_t> col_ptr;
  std::vector<std::size_t> row_idx;
  std::vector<double> values;

  explicit ColumnMajor(const SparseMatrix& x) : col_ptr(x.n_cols() + 1, 0) {
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      for (std::size_t c : x.row_cols(i)) ++col_ptr[c + 1];
    }
    for (std::size_t j = 0; j < x.n_cols(); ++j) col_ptr[j + 1] += col_ptr[j];
    row_idx.resize(x.nnz());
    values.resize(x.nnz());
    std::vector<std::size_t> next(col_ptr.begin(), col_ptr.end() - 1);
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      const auto cols = x.row_cols(i);
      const auto vals = x.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const std::size_t pos = next[cols[k]]++;
        row_idx[pos] = i;
        values[pos] = vals[k];
      }
    }
  }
};

class CoordinateDescent {
 public:
  CoordinateDescent(const SparseMatrix& x, std::span<const int> y,
                    std::vector<double> weights, const FitConfig& cfg)
      : x_(x),
        cols_(x),
        y_(y.begin(), y.end()),
        c_(std::move(weights)),
        cfg_(cfg),
        beta_(x.n_cols(), 0.0),
        col_max_(x.n_cols(), 0.0),
        radius_(x.n_cols(), 1.0) {
    for (double c : c_) weight_sum_ += c;
    center_.assign(x.n_cols(), 0.0);
    for (std::size_t j = 0; j < x.n_cols(); ++j) {
      double lo = 0.0;
      double hi = 0.0;
      double sum = 0.0;
      for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
        const double v = cols_.values[k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += c_[cols_.row_idx[k]] * v;
      }
      if (hi == lo) continue;  // empty column
      // Sparse columns have implicit zeros, so a dense column gives lo > 0.
      if (cols_.col_ptr[j + 1] - cols_.col_ptr[j] == x.n_rows()) {
        lo = hi;
        for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
          lo = std::min(lo, cols_.values[k]);
        }
      }
      if (!cfg.penalize_intercept) center_[j] = sum / weight_sum_;
      col_max_[j] = std::max(std::abs(hi - center_[j]), std::abs(lo - center_[j]));
    }
  }

  ModelFit run(const ModelFit* warm) {
    if (warm) {
      if (warm->coefficients.size() != beta_.size()) {
        throw InternalError("warm start has the wrong number of coefficients");
      }
      intercept_ = warm->intercept;
      beta_ = warm->coefficients;
    } else {
      intercept_ = cfg_.penalize_intercept ? 0.0 : weighted_log_odds(y_, c_);
    }
    eta_ = margins(intercept_, beta_, x_);
    p_.resize(eta_.size());
    tail_.resize(eta_.size());
    for (std::size_t i = 0; i < eta_.size(); ++i) set_margin(i, eta_[i]);

    ModelFit out;
    int iters = 0;
    bool converged = false;
    double residual = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> all(beta_.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;

    residual = kkt(all);
    converged = residual <= cfg_.tol;
    if (warm) {
      // A good warm start usually has the right sign pattern already.
      for (int k = 0; k < 3 && !converged && iters < cfg_.max_iters; ++k) {
        if (!newton_step(nonzero())) break;
        ++iters;
        trace(out);
        residual = kkt(all);
        converged = residual <= cfg_.tol;
      }
    }
    while (!converged && iters < cfg_.max_iters) {
      sweep(all);
      ++iters;
      trace(out);
      residual = kkt(all);
      if (residual <= cfg_.tol) {
        converged = true;
        break;
      }
      const auto active = nonzero();
      while (iters < cfg_.max_iters) {
        if (sweep(active)) newton_step(active);
        ++iters;
        trace(out);
        if (kkt(active) <= cfg_.tol) break;
      }
    }
    if (!converged) residual = kkt(all);

    out.intercept = intercept_;
    out.coefficients = beta_;
    out.lambda = cfg_.lambda;
    out.weight_mode = cfg_.weight_mode;
    out.n_iters = iters;
    out.converged = converged;
    out.kkt_residual = residual;
    out.objective_value = current_objective();
    return out;
  }

 private:
  std::vector<std::size_t> nonzero() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < beta_.size(); ++j) {
      if (beta_[j] != 0.0) out.push_back(j);
    }
    return out;
  }

  // Returns true when no coordinate changed sign or left zero.
  bool sweep(const std::vector<std::size_t>& coords) {
    const double start_intercept = intercept_;
    start_beta_.resize(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) start_beta_[k] = beta_[coords[k]];
    start_eta_ = eta_;
    update_intercept();
    for (std::size_t j : coords) update_coordinate(j);
    extrapolate(coords, start_intercept);
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (sign_of(beta_[coords[k]]) != sign_of(start_beta_[k])) return false;
    }
    return true;
  }

  // Damped Newton step on the intercept and the nonzero coordinates, with
  // the penalty linear in the current sign pattern. The step stops where the
  // first coefficient reaches zero and is halved until the objective does
  // not increase. Returns false when no step was taken.
  bool newton_step(const std::vector<std::size_t>& active) {
    if (cfg_.penalize_intercept || active.empty()) return false;
    const auto n = static_cast<Eigen::Index>(eta_.size());
    const auto a = static_cast<Eigen::Index>(active.size() + 1);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, a);
    d.col(0).setOnes();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t j = active[k];
      for (std::size_t e = cols_.col_ptr[j]; e < cols_.col_ptr[j + 1]; ++e) {
        d(static_cast<Eigen::Index>(cols_.row_idx[e]), static_cast<Eigen::Index>(k + 1)) =
            cols_.values[e];
      }
    }
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      w[i] = c_[u] * p_[u] * (1.0 - p_[u]);
      r[i] = c_[u] * (p_[u] - y_[u]);
    }
    Eigen::VectorXd g = d.transpose() * r;
    for (std::size_t k = 0; k < active.size(); ++k) {
      g[static_cast<Eigen::Index>(k + 1)] += cfg_.lambda * sign_of(beta_[active[k]]);
    }
    const Eigen::MatrixXd h = d.transpose() * w.asDiagonal() * d;
    const Eigen::LDLT<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) return false;
    const Eigen::VectorXd step = -solver.solve(g);
    if (!step.allFinite()) return false;
    const Eigen::VectorXd move = d * step;

    double t = 1.0;
    std::size_t hit = active.size();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double b = beta_[active[k]];
      const double s = step[static_cast<Eigen::Index>(k + 1)];
      if (b * s < 0.0 && -b / s < t) {
        t = -b / s;
        hit = k;
      }
    }
    const double before = current_objective();
    std::vector<double> beta(beta_);
    for (int tries = 0; tries < 30; ++tries, t *= 0.5, hit = active.size()) {
      beta = beta_;
      for (std::size_t k = 0; k < active.size(); ++k) {
        beta[active[k]] = k == hit ? 0.0 : beta_[active[k]] + t * step[static_cast<Eigen::Index>(k + 1)];
      }
      double f = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double e = eta_[u] + t * move[i];
        f += c_[u] * softplus(y_[u] ? -e : e);
      }
      double l1 = 0.0;
      for (double b : beta) l1 += std::abs(b);
      if (f + cfg_.lambda * l1 <= before) {
        intercept_ += t * step[0];
        beta_ = beta;
        for (Eigen::Index i = 0; i < n; ++i) {
          set_margin(static_cast<std::size_t>(i), eta_[static_cast<std::size_t>(i)] + t * move[i]);
        }
        return true;
      }
    }
    return false;
  }

  // Line search along the displacement of the last sweep, beyond its end
  // point. Steps stop before any coefficient changes sign, so the penalty is
  // linear along the ray, and a step is taken only if it lowers the objective.
  void extrapolate(const std::vector<std::size_t>& coords, double start_intercept) {
    const double d0 = intercept_ - start_intercept;
    double t_max = 64.0;
    double l1_slope = cfg_.penalize_intercept ? sign_of(intercept_) * d0 : 0.0;
    double l1_now = cfg_.penalize_intercept ? std::abs(intercept_) : 0.0;
    bool moved = d0 != 0.0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const double b = beta_[coords[k]];
      const double d = b - start_beta_[k];
      if (d == 0.0) continue;
      moved = true;
      if (b == 0.0) return;  // on an orthant boundary
      if (b * d < 0.0) t_max = std::min(t_max, -b / d);
      l1_slope += sign_of(b) * d;
    }
    if (cfg_.penalize_intercept && intercept_ * d0 < 0.0) t_max = std::min(t_max, -intercept_ / d0);
    if (!moved || t_max < 0.5) return;
    for (double b : beta_) l1_now += std::abs(b);

    auto value_at = [&](double t) {
      double f = 0.0;
      for (std::size_t i = 0; i < eta_.size(); ++i) {
        const double e = eta_[i] + t * (eta_[i] - start_eta_[i]);
        f += c_[i] * softplus(y_[i] ? -e : e);
      }
      return f + cfg_.lambda * (l1_now + t * l1_slope);
    };
    const double base = value_at(0.0);
    double best_t = 0.0;
    double best = base;
    for (double t = 1.0; t <= t_max; t *= 2.0) {
      const double f = value_at(t);
      if (!(f < best)) break;
      best = f;
      best_t = t;
    }
    if (best_t == 0.0 && t_max < 1.0) {
      const double f = value_at(t_max);
      if (f < best) {
        best = f;
        best_t = t_max;
      }
    }
    if (best_t == 0.0) return;
    intercept_ += best_t * d0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const std::size_t j = coords[k];
      double next = beta_[j] + best_t * (beta_[j] - start_beta_[k]);
      if (best_t == t_max && std::abs(next) < 1e-12 * std::abs(beta_[j])) next = 0.0;
      beta_[j] = next;
    }
    for (std::size_t i = 0; i < eta_.size(); ++i) {
      set_margin(i, eta_[i] + best_t * (eta_[i] - start_eta_[i]));
    }
  }

  void update_intercept() {
    double g = 0.0;
    double h = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      g += c_[i] * (p_[i] - y_[i]);
      h += c_[i] * p_[i] * (1.0 - p_[i]);
    }
    if (cfg_.penalize_intercept) {
      const double bound = 0.25 * weight_sum_;
      const double next = soft_threshold(intercept_ - g / bound, cfg_.lambda / bound);
      shift_intercept(next - intercept_);
      return;
    }
    if (g == 0.0) return;
    // Newton step, halved until the loss does not increase. Close to the
    // optimum the decrease is below rounding, so a step that shrinks the
    // gradient without a visible loss increase also counts.
    // A step that keeps the sign of the slope is a descent step of the convex
    // one-dimensional loss and needs no loss evaluation.
    double step = h > 0 ? -g / h : -g / (0.25 * weight_sum_);
    double before = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < 60; ++k) {
      const double slope = slope_at_shift(step);
      if (slope * g >= 0.0) {
        shift_intercept(step);
        return;
      }
      if (std::isnan(before)) before = loss_at_shift(0.0);
      const double loss = loss_at_shift(step);
      if (loss <= before ||
          (loss <= before + 1e-13 * std::abs(before) && std::abs(slope) < std::abs(g))) {
        shift_intercept(step);
        return;
      }
      step *= 0.5;
    }
  }

  double slope_at_shift(double delta) const {
    double g = 0.0;
    for (std::size_t i = 0; i < eta_.size(); ++i) g += c_[i] * (sigmoid(eta_[i] + delta) - y_[i]);
    return g;
  }

  double loss_at_shift(double delta) const {
    double f = 0.0;
    for (std::size_t i = 0; i < eta_.size(); ++i) {
      const double e = eta_[i] + delta;
      f += c_[i] * softplus(y_[i] ? -e : e);
    }
    return f;
  }

  void shift_intercept(double delta) {
    if (delta == 0.0) return;
    intercept_ += delta;
    for (std::size_t i = 0; i < eta_.size(); ++i) {
      set_margin(i, eta_[i] + delta);
    }
    if (!std::isfinite(intercept_)) throw NumericalError("intercept diverged to non-finite");
  }

  double gradient(std::size_t j) const {
    double g = 0.0;
    for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
      const std::size_t i = cols_.row_idx[k];
      g += c_[i] * cols_.values[k] * (p_[i] - y_[i]);
    }
    return g;
  }

  // Majorization step on coordinate j. The curvature is the largest
  // c*x^2*p(1-p) while every margin moves by at most radius_[j], so it never
  // exceeds the global bound 0.25*sum(c*x^2); the step is clamped to that
  // interval, which keeps the quadratic a majorizer and each step a descent.
  // Moves beta_j along the column centered at its weighted mean; with an
  // unpenalized intercept the same step also moves the intercept by
  // -mean * delta, so the coordinate is decoupled from it.
  void update_coordinate(std::size_t j) {
    if (col_max_[j] == 0.0) return;
    const double mu = center_[j];
    const std::size_t n = eta_.size();
    dir_.assign(n, -mu);
    for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
      dir_[cols_.row_idx[k]] += cols_.values[k];
    }
    const double radius = radius_[j];
    const double grow = std::exp(radius);
    double g = 0.0;
    double h = 0.0;
    if (mu == 0.0) {
      for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
        const std::size_t i = cols_.row_idx[k];
        const double v = cols_.values[k];
        g += c_[i] * v * (p_[i] - y_[i]);
        h += c_[i] * v * v * max_curvature(tail_[i], grow);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = dir_[i];
        g += c_[i] * v * (p_[i] - y_[i]);
        h += c_[i] * v * v * max_curvature(tail_[i], grow);
      }
    }
    if (beta_[j] == 0.0 && std::abs(g) <= cfg_.lambda) return;
    if (h <= 0.0) return;
    const double limit = radius / col_max_[j];
    double delta = soft_threshold(beta_[j] - g / h, cfg_.lambda / h) - beta_[j];
    if (std::abs(delta) >= limit) {
      delta = delta > 0 ? limit : -limit;
      radius_[j] = std::min(radius * 4.0, 700.0);
    } else {
      radius_[j] = std::max(2.0 * std::abs(delta) * col_max_[j], 1e-3);
    }
    if (delta == 0.0) return;
    const double next = beta_[j] + delta;
    if (!std::isfinite(next)) {
      throw NumericalError("coefficient " + std::to_string(j) + " became non-finite");
    }
    beta_[j] = next;
    if (mu == 0.0) {
      for (std::size_t k = cols_.col_ptr[j]; k < cols_.col_ptr[j + 1]; ++k) {
        const std::size_t i = cols_.row_idx[k];
        set_margin(i, eta_[i] + delta * cols_.values[k]);
      }
    } else {
      intercept_ -= delta * mu;
      for (std::size_t i = 0; i < n; ++i) set_margin(i, eta_[i] + delta * dir_[i]);
    }
  }

  void set_margin(std::size_t i, double eta) {
    eta_[i] = eta;
    const double e = std::exp(-std::abs(eta));
    tail_[i] = e;
    p_[i] = eta >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }

  double kkt(const std::vector<std::size_t>& coords) const {
    double g0 = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) g0 += c_[i] * (p_[i] - y_[i]);
    double r = cfg_.penalize_intercept
                   ? (intercept_ != 0.0 ? std::abs(g0 + cfg_.lambda * sign_of(intercept_))
                                        : std::max(0.0, std::abs(g0) - cfg_.lambda))
                   : std::abs(g0);
    for (std::size_t j : coords) {
      const double g = gradient(j);
      const double rj = beta_[j] != 0.0 ? std::abs(g + cfg_.lambda * sign_of(beta_[j]))
                                        : std::max(0.0, std::abs(g) - cfg_.lambda);
      r = std::max(r, rj);
    }
    if (std::isnan(r)) throw NumericalError("NaN in coordinate descent iterates");
    return r;
  }

  double current_objective() const {
    double f = loss_at_shift(0.0);
    double l1 = 0.0;
    for (double b : beta_) l1 += std::abs(b);
    if (cfg_.penalize_intercept) l1 += std::abs(intercept_);
    return f + cfg_.lambda * l1;
  }

  void trace(ModelFit& out) const {
    if (cfg_.record_trace) out.objective_trace.push_back(current_objective());
  }

  const SparseMatrix& x_;
  ColumnMajor cols_;
  std::vector<int> y_;
  std::vector<double> c_;
  const FitConfig& cfg_;
  double intercept_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> col_max_;  // largest |x_ij - center_j|
  std::vector<double> center_;
  std::vector<double> dir_;
  std::vector<double> start_beta_;
  std::vector<double> start_eta_;
  std::vector<double> radius_;  // trust radius on the margins, per coordinate
  std::vector<double> eta_;
  std::vector<double> p_;
  std::vector<double> tail_;  // exp(-|eta|)
  double weight_sum_ = 0.0;
};

std::vector<double> column_scales(const SparseMatrix& x) {
  const double n = static_cast<double>(x.n_rows());
  std::vector<double> sum(x.n_cols(), 0.0), sum_sq(x.n_cols(), 0.0);
  for (const auto& t : x.triplets()) {
    sum[t.col] += t.value;
    sum_sq[t.col] += t.value * t.value;
  }
  std::vector<double> scale(x.n_cols(), 1.0);
  for (std::size_t j = 0; j < x.n_cols(); ++j) {
    const double mean = sum[j] / n;
    const double var = sum_sq[j] / n - mean * mean;
    if (var > 0) scale[j] = std::sqrt(var);
  }
  return scale;
}

}  // namespace

std::string to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::balanced:
      return "balanced";
    case WeightMode::literal:
      return "literal";
    case WeightMode::uniform:
      return "uniform";
  }
  return "?";
}

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "balanced") return WeightMode::balanced;
  if (s == "literal") return WeightMode::literal;
  if (s == "uniform") return WeightMode::uniform;
  throw InputError("unknown weight mode: " + s +
                   " (expected balanced, literal or uniform)");
}

void FitConfig::validate() const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) {
    throw InputError("lambda must be finite and nonnegative");
  }
  if (!(tol > 0)) throw InputError("tol must be positive");
  if (max_iters < 1) throw InputError("max_iters must be at least 1");
}

std::size_t ModelFit::nnz() const {
  return static_cast<std::size_t>(
      std::count_if(coefficients.begin(), coefficients.end(), [](double b) { return b != 0.0; }));
}

ClassWeights class_weights(std::span<const int> labels, WeightMode mode) {
  const std::size_t n = labels.size();
  std::size_t n_pos = 0;
  for (int v : labels) {
    if (v != 0 && v != 1) throw InputError("labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(v);
  }
  const std::size_t n_neg = n - n_pos;
  ClassWeights w;
  w.per_sample.assign(n, 1.0);
  if (mode == WeightMode::uniform) return w;
  if (n_pos == 0 || n_neg == 0) {
    throw InputError("class weighting '" + to_string(mode) +
                     "' requires labels from both classes");
  }
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double n_class = static_cast<double>(labels[i] ? n_pos : n_neg);
    w.per_sample[i] = mode == WeightMode::balanced ? nd / (2.0 * n_class) : n_class / nd;
  }
  return w;
}

double objective(double intercept, std::span<const double> beta, const SparseMatrix& x,
                 std::span<const int> y, std::span<const double> weights, double lambda,
                 bool penalize_intercept) {
  check_dims(x, y);
  if (!std::isfinite(intercept) || !std::isfinite(lambda)) {
    throw InputError("objective: non-finite input");
  }
  for (double b : beta) {
    if (!std::isfinite(b)) throw InputError("objective: non-finite coefficient");
  }
  const auto eta = margins(intercept, beta, x);
  double f = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double s = y[i] ? 1.0 : -1.0;
    f += weights[i] * softplus(-s * eta[i]);
  }
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  if (penalize_intercept) l1 += std::abs(intercept);
  return f + lambda * l1;
}

double objective(double intercept, std::span<const double> beta, const SparseMatrix& x,
                 std::span<const int> y, const FitConfig& cfg) {
  const auto w = class_weights(y, cfg.weight_mode);
  return objective(intercept, beta, x, y, w.per_sample, cfg.lambda, cfg.penalize_intercept);
}

std::vector<double> smooth_gradient(double intercept, std::span<const double> beta,
                                    const SparseMatrix& x, std::span<const int> y,
                                    std::span<const double> weights) {
  check_dims(x, y);
  const auto eta = margins(intercept, beta, x);
  std::vector<double> g(x.n_cols() + 1, 0.0);
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double r = weights[i] * (sigmoid(eta[i]) - y[i]);
    g[0] += r;
    const auto cols = x.row_cols(i);
    const auto vals = x.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) g[cols[k] + 1] += r * vals[k];
  }
  return g;
}

double kkt_residual(double intercept, std::span<const double> beta, const SparseMatrix& x,
                    std::span<const int> y, const FitConfig& cfg) {
  const auto w = class_weights(y, cfg.weight_mode);
  const auto g = smooth_gradient(intercept, beta, x, y, w.per_sample);
  auto coord = [&](double value, double grad) {
    return value != 0.0 ? std::abs(grad + cfg.lambda * sign_of(value))
                        : std::max(0.0, std::abs(grad) - cfg.lambda);
  };
  double r = cfg.penalize_intercept ? coord(intercept, g[0]) : std::abs(g[0]);
  for (std::size_t j = 0; j < beta.size(); ++j) r = std::max(r, coord(beta[j], g[j + 1]));
  return r;
}

double weighted_log_odds(std::span<const int> y, std::span<const double> weights) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += weights[i] * y[i];
    den += weights[i];
  }
  const double neg = den - num;
  if (num <= 0.0 || neg <= 0.0) {
    throw InputError("labels must contain both classes for an unpenalized intercept");
  }
  return std::log(num / neg);
}

double lambda_max(const SparseMatrix& x, std::span<const int> y, WeightMode mode) {
  check_dims(x, y);
  const auto w = class_weights(y, mode);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += w.per_sample[i] * y[i];
    den += w.per_sample[i];
  }
  const double pbar = num / den;
  std::vector<double> g(x.n_cols(), 0.0);
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    const double r = w.per_sample[i] * (y[i] - pbar);
    const auto cols = x.row_cols(i);
    const auto vals = x.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) g[cols[k]] += r * vals[k];
  }
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

ModelFit fit(const SparseMatrix& x, std::span<const int> y, const FitConfig& cfg,
             const ModelFit* warm_start) {
  cfg.validate();
  check_dims(x, y);
  const auto weights = class_weights(y, cfg.weight_mode).per_sample;
  return fit(x, y, weights, cfg, warm_start);
}

ModelFit fit(const SparseMatrix& x, std::span<const int> y, std::span<const double> weights,
             const FitConfig& cfg, const ModelFit* warm_start) {
  cfg.validate();
  check_dims(x, y);
  if (y.size() < 2) throw InputError("fit needs at least two samples");
  if (weights.size() != y.size()) throw InternalError("fit: one weight per sample required");
  std::vector<double> c(weights.begin(), weights.end());

  if (!cfg.standardize) {
    return CoordinateDescent(x, y, std::move(c), cfg).run(warm_start);
  }
  const auto scale = column_scales(x);
  std::vector<featurizer::Triplet> entries = x.triplets();
  for (auto& t : entries) t.value /= scale[t.col];
  const SparseMatrix scaled =
      SparseMatrix::from_triplets(x.n_rows(), x.n_cols(), std::move(entries));
  ModelFit warm_scaled;
  if (warm_start) {
    warm_scaled = *warm_start;
    for (std::size_t j = 0; j < scale.size(); ++j) warm_scaled.coefficients[j] *= scale[j];
  }
  ModelFit out = CoordinateDescent(scaled, y, std::move(c), cfg)
                     .run(warm_start ? &warm_scaled : nullptr);
  for (std::size_t j = 0; j < scale.size(); ++j) out.coefficients[j] /= scale[j];
  return out;
}

std::vector<ModelFit> fit_path(const SparseMatrix& x, std::span<const int> y,
                               const FitConfig& cfg, std::span<const double> lambdas) {
  std::vector<ModelFit> path;
  path.reserve(lambdas.size());
  for (double lambda : lambdas) {
    FitConfig step = cfg;
    step.lambda = lambda;
    path.push_back(fit(x, y, step, path.empty() ? nullptr : &path.back()));
  }
  return path;
}

std::vector<double> predict_proba(const ModelFit& model, const SparseMatrix& x) {
  if (model.coefficients.size() != x.n_cols()) {
    throw InputError("model has " + std::to_string(model.coefficients.size()) +
                     " coefficients but the matrix has " + std::to_string(x.n_cols()) +
                     " columns");
  }
  auto eta = margins(model.intercept, model.coefficients, x);
  for (double& v : eta) v = sigmoid(v);
  return eta;
}

std::vector<int> predict(const ModelFit& model, const SparseMatrix& x) {
  const auto p = predict_proba(model, x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= 0.5 ? 1 : 0;
  return out;
}

nlohmann::json to_json(const ModelFit& model, std::span<const std::string> terms) {
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t j = 0; j < model.coefficients.size(); ++j) {
    if (model.coefficients[j] == 0.0) continue;
    coefs.push_back({{"term", j < terms.size() ? terms[j] : std::to_string(j)},
                     {"value", round12(model.coefficients[j])}});
  }
  return {{"intercept", round12(model.intercept)},
          {"lambda", round12(model.lambda)},
          {"weight_mode", to_string(model.weight_mode)},
          {"converged", model.converged},
          {"n_iters", model.n_iters},
          {"coefficients", coefs}};
}

}  // namespace planlens::glm
