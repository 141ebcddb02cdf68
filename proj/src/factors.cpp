#include "planlens/factors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "planlens/common.hpp"
#include "planlens/csv.hpp"
#include "planlens/topics.hpp"

namespace planlens::factors {

CorrelationMatrix topic_correlations(const Eigen::MatrixXd& data,
                                     std::vector<std::string> labels) {
  const auto n = data.rows();
  const auto p = data.cols();
  if (n < 3) {
    throw InputError("correlation needs at least 3 observations, got " + std::to_string(n));
  }
  if (static_cast<Eigen::Index>(labels.size()) != p) {
    throw InternalError("correlation: label count does not match columns");
  }
  if (!data.allFinite()) throw NumericalError("correlation input contains NaN or infinity");

  CorrelationMatrix r;
  r.labels = std::move(labels);
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  Eigen::VectorXd norm(p);
  std::vector<bool> constant(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    constant[j] = data.col(j).maxCoeff() == data.col(j).minCoeff();
    norm[j] = centered.col(j).norm();
    if (constant[j]) r.zero_variance.push_back(r.labels[j]);
  }
  r.values = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) {
      double v = 0.0;
      if (!constant[a] && !constant[b]) {
        v = std::clamp(centered.col(a).dot(centered.col(b)) / (norm[a] * norm[b]), -1.0, 1.0);
      }
      r.values(a, b) = v;
      r.values(b, a) = v;
    }
  }
  return r;
}

std::string to_string(Extraction e) {
  return e == Extraction::principal_axis ? "principal_axis" : "principal_components";
}

Extraction parse_extraction(const std::string& s) {
  if (s == "principal_axis" || s == "paf") return Extraction::principal_axis;
  if (s == "principal_components" || s == "pca") return Extraction::principal_components;
  throw InputError("unknown extraction: " + s + " (expected principal_axis or principal_components)");
}

std::string to_string(Rotation r) { return r == Rotation::varimax ? "varimax" : "none"; }

Rotation parse_rotation(const std::string& s) {
  if (s == "varimax") return Rotation::varimax;
  if (s == "none") return Rotation::none;
  throw InputError("unknown rotation: " + s + " (expected varimax or none)");
}

double FactorModel::reproduction_residual() const {
  Eigen::MatrixXd implied = loadings * loadings.transpose();
  implied.diagonal() += uniquenesses;
  return (correlation - implied).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings, double tol, int max_iters) {
  const auto p = loadings.rows();
  const auto k = loadings.cols();
  if (k < 2) return loadings;
  Eigen::VectorXd scale = loadings.rowwise().norm();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (scale[j] == 0.0) scale[j] = 1.0;
  }
  const Eigen::MatrixXd x = scale.asDiagonal().inverse() * loadings;
  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(k, k);
  double d = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd z = x * rot;
    const Eigen::RowVectorXd col_ss = z.array().square().colwise().sum();
    const Eigen::MatrixXd target =
        z.array().cube().matrix() - z * (col_ss / static_cast<double>(p)).asDiagonal();
    const Eigen::MatrixXd b = x.transpose() * target;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().transpose();
    const double previous = d;
    d = svd.singularValues().sum();
    if (d < previous * (1.0 + tol)) break;
  }
  return scale.asDiagonal() * (x * rot);
}

namespace {

bool in_ecology_set(const std::string& label) {
  const auto t = topics::topic_index(label);
  if (!t) return false;
  const std::string& name = topics::topic_names()[*t];
  return name == "pollution/waste" || name == "land use" || name == "climate impacts" ||
         name == "offsets";
}

Eigen::VectorXd squared_multiple_correlations(const Eigen::MatrixXd& r) {
  const auto p = r.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1.0) * 1e-12;
  Eigen::VectorXd inv_ev(p);
  for (Eigen::Index i = 0; i < p; ++i) inv_ev[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
  const Eigen::MatrixXd inv = eig.eigenvectors() * inv_ev.asDiagonal() *
                              eig.eigenvectors().transpose();
  Eigen::VectorXd smc(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = inv(j, j);
    if (d >= 1.0) {
      smc[j] = 1.0 - 1.0 / d;
    } else {
      // Singular R: fall back to the largest absolute correlation.
      double best = 0.0;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k != j) best = std::max(best, std::abs(r(j, k)));
      }
      smc[j] = best;
    }
  }
  return smc;
}

Eigen::MatrixXd top_loadings(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto p = m.rows();
  Eigen::MatrixXd l(p, kFactorCount);
  for (int f = 0; f < kFactorCount; ++f) {
    const Eigen::Index idx = p - 1 - f;  // eigenvalues ascend
    l.col(f) = eig.eigenvectors().col(idx) * std::sqrt(std::max(eig.eigenvalues()[idx], 0.0));
  }
  return l;
}

}  // namespace

FactorModel fit_factor_model(const CorrelationMatrix& r, const FactorOptions& options) {
  const auto p = r.values.rows();
  if (p < kFactorCount || r.values.cols() != p) {
    throw InputError("factor analysis needs a square correlation matrix of at least 2 variables");
  }
  if (!r.values.allFinite()) throw NumericalError("correlation matrix contains NaN");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.values, Eigen::EigenvaluesOnly);
    const auto positive = (eig.eigenvalues().array() > 1e-12).count();
    if (positive < kFactorCount) {
      throw NumericalError("correlation matrix has " + std::to_string(positive) +
                           " positive eigenvalues; two factors need at least 2");
    }
  }

  FactorModel model;
  model.labels = r.labels;
  model.correlation = r.values;
  model.options = options;

  Eigen::MatrixXd l;
  if (options.extraction == Extraction::principal_components) {
    l = top_loadings(r.values);
    model.iterations = 1;
  } else {
    Eigen::VectorXd h = squared_multiple_correlations(r.values);
    model.converged = false;
    for (int it = 1; it <= options.max_iters; ++it) {
      Eigen::MatrixXd reduced = r.values;
      reduced.diagonal() = h;
      l = top_loadings(reduced);
      Eigen::VectorXd next = l.rowwise().squaredNorm();
      next = next.cwiseMin(1.0);
      const double change = (next - h).cwiseAbs().maxCoeff();
      h = next;
      model.iterations = it;
      if (change < options.tol) {
        model.converged = true;
        break;
      }
    }
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    const double norm = l.row(j).norm();
    if (norm * norm > 1.0) {
      l.row(j) /= norm;
      model.heywood.push_back(r.labels[j]);
    }
  }
  model.communalities = l.rowwise().squaredNorm();
  model.no_factor_structure = (model.communalities.array() <= options.eigen_floor).all();

  if (options.rotation == Rotation::varimax && !model.no_factor_structure) {
    l = varimax(l, options.varimax_tol);
    model.communalities = l.rowwise().squaredNorm();
  }

  for (int f = 0; f < kFactorCount; ++f) {
    Eigen::Index top = 0;
    l.col(f).cwiseAbs().maxCoeff(&top);
    if (l(top, f) < 0.0) l.col(f) = -l.col(f);
  }
  double eco[kFactorCount] = {0.0, 0.0};
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!in_ecology_set(r.labels[j])) continue;
    for (int f = 0; f < kFactorCount; ++f) eco[f] += std::abs(l(j, f));
  }
  if (eco[1] > eco[0]) l.col(0).swap(l.col(1));

  model.loadings = l;
  model.uniquenesses = (1.0 - model.communalities.array()).matrix();
  return model;
}

std::string to_string(Quadrant q) {
  switch (q) {
    case Quadrant::I: return "I";
    case Quadrant::II: return "II";
    case Quadrant::III: return "III";
    case Quadrant::IV: return "IV";
  }
  return "III";
}

Quadrant quadrant(double ecology, double infrastructure) {
  const bool e = ecology > 0.0;
  const bool i = infrastructure > 0.0;
  if (e && i) return Quadrant::II;
  if (i) return Quadrant::I;
  if (e) return Quadrant::IV;
  return Quadrant::III;
}

ScoreResult factor_scores(const FactorModel& model, const Eigen::MatrixXd& data,
                          std::span<const std::string> row_ids) {
  const auto n = data.rows();
  const auto p = data.cols();
  if (p != model.loadings.rows()) {
    throw InputError("factor scores: data has " + std::to_string(p) + " columns, model has " +
                     std::to_string(model.loadings.rows()));
  }
  if (static_cast<Eigen::Index>(row_ids.size()) != n) {
    throw InternalError("factor scores: row id count does not match rows");
  }
  Eigen::MatrixXd z = data.rowwise() - data.colwise().mean();
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool constant = data.col(j).maxCoeff() == data.col(j).minCoeff();
    if (constant || n < 2) {
      z.col(j).setZero();
    } else {
      z.col(j) /= z.col(j).norm() / std::sqrt(static_cast<double>(n - 1));
    }
  }

  ScoreResult out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.correlation);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev.cwiseAbs().minCoeff();
  out.condition_number =
      smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  const double cutoff = largest * 1e-12;
  Eigen::VectorXd inv_ev(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::abs(ev[i]) > cutoff) {
      inv_ev[i] = 1.0 / ev[i];
    } else {
      inv_ev[i] = 0.0;
      out.pseudo_inverse = true;
    }
  }
  const Eigen::MatrixXd weights =
      eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose() * model.loadings;
  const Eigen::MatrixXd s = z * weights;
  out.scores.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    FactorScore fs{row_ids[i], s(i, 0), s(i, 1), Quadrant::III};
    fs.quadrant = quadrant(fs.ecology, fs.infrastructure);
    out.scores.push_back(std::move(fs));
  }
  return out;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("percentile of an empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryTable summary_stats(std::span<const corpus::CityRecord> records) {
  using Field = std::optional<double> corpus::CityRecord::*;
  const std::pair<const char*, Field> fields[] = {
      {"population", &corpus::CityRecord::population},
      {"baseline_year", &corpus::CityRecord::baseline_year},
      {"percent_reduction", &corpus::CityRecord::percent_reduction},
      {"emis_per_capita", &corpus::CityRecord::emis_per_capita},
  };
  SummaryTable table;
  for (const auto& [name, field] : fields) {
    std::vector<double> v;
    for (const auto& rec : records) {
      if (rec.*field) v.push_back(*(rec.*field));
    }
    ColumnSummary col;
    col.variable = name;
    col.n = v.size();
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      const double mean = sum / static_cast<double>(v.size());
      col.mean = mean;
      if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        col.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
      col.min = v.front();
      col.max = v.back();
      col.p25 = percentile(v, 0.25);
      col.p75 = percentile(v, 0.75);
    }
    table.columns.push_back(col);
  }
  for (const auto& rec : records) {
    if (rec.percent_reduction && *rec.percent_reduction > 100.0) {
      table.flagged_percent_reduction.emplace_back(rec.city_id, *rec.percent_reduction);
    }
  }
  return table;
}

// ---- persistence ------------------------------------------------------------

std::string correlation_csv(const CorrelationMatrix& r) {
  csv::Row header{"topic"};
  header.insert(header.end(), r.labels.begin(), r.labels.end());
  std::string out = csv::join(header);
  for (std::size_t a = 0; a < r.labels.size(); ++a) {
    csv::Row row{r.labels[a]};
    for (std::size_t b = 0; b < r.labels.size(); ++b) {
      row.push_back(format_number(r.values(a, b)));
    }
    out += csv::join(row);
  }
  return out;
}

std::string loadings_csv(const FactorModel& model) {
  std::string out = "topic,ecology,infrastructure,communality\n";
  for (std::size_t j = 0; j < model.labels.size(); ++j) {
    out += csv::join({model.labels[j], format_number(model.loadings(j, 0)),
                      format_number(model.loadings(j, 1)),
                      format_number(model.communalities[j])});
  }
  return out;
}

std::string scores_csv(std::span<const FactorScore> scores) {
  std::string out = "city_id,ecology,infrastructure,quadrant\n";
  for (const auto& s : scores) {
    out += csv::join({s.city_id, format_number(s.ecology), format_number(s.infrastructure),
                      to_string(s.quadrant)});
  }
  return out;
}

std::string summary_csv(const SummaryTable& table) {
  std::string out = "variable,n,mean,sd,min,p25,p75,max\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : "NA"; };
  for (const auto& c : table.columns) {
    out += csv::join({c.variable, std::to_string(c.n), cell(c.mean), cell(c.sd), cell(c.min),
                      cell(c.p25), cell(c.p75), cell(c.max)});
  }
  return out;
}

nlohmann::json to_json(const FactorModel& model, const ScoreResult& scores,
                       const CorrelationMatrix& r) {
  nlohmann::json quadrants = {{"I", 0}, {"II", 0}, {"III", 0}, {"IV", 0}};
  for (const auto& s : scores.scores) {
    quadrants[to_string(s.quadrant)] = quadrants[to_string(s.quadrant)].get<int>() + 1;
  }
  return {
      {"extraction", to_string(model.options.extraction)},
      {"rotation", to_string(model.options.rotation)},
      {"factor_names", model.factor_names},
      {"iterations", model.iterations},
      {"converged", model.converged},
      {"heywood", model.heywood},
      {"no_factor_structure", model.no_factor_structure},
      {"zero_variance_topics", r.zero_variance},
      {"reproduction_residual", round12(model.reproduction_residual())},
      {"score_condition_number", std::isfinite(scores.condition_number)
                                     ? nlohmann::json(round12(scores.condition_number))
                                     : nlohmann::json(nullptr)},
      {"score_pseudo_inverse", scores.pseudo_inverse},
      {"quadrant_counts", quadrants},
      {"zero_score_rule", "a zero score counts as negative"},
  };
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string scores_svg(std::span<const FactorScore> scores) {
  double extent = 1.0;
  for (const auto& s : scores) {
    extent = std::max({extent, std::abs(s.ecology), std::abs(s.infrastructure)});
  }
  extent *= 1.1;
  const double size = 480.0;
  const double half = size / 2.0;
  auto px = [&](double v) { return half + v / extent * (half - 20.0); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
      "viewBox=\"0 0 480 480\">\n"
      "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n"
      "<line x1=\"0\" y1=\"240\" x2=\"480\" y2=\"240\" stroke=\"gray\"/>\n"
      "<line x1=\"240\" y1=\"0\" x2=\"240\" y2=\"480\" stroke=\"gray\"/>\n"
      "<text x=\"470\" y=\"232\" text-anchor=\"end\" font-size=\"12\">Ecology</text>\n"
      "<text x=\"248\" y=\"14\" font-size=\"12\">Infrastructure</text>\n"
      "<text x=\"20\" y=\"30\" font-size=\"14\">I</text>\n"
      "<text x=\"450\" y=\"30\" font-size=\"14\">II</text>\n"
      "<text x=\"20\" y=\"465\" font-size=\"14\">III</text>\n"
      "<text x=\"450\" y=\"465\" font-size=\"14\">IV</text>\n";
  for (const auto& s : scores) {
    out += "<circle cx=\"" + num(px(s.ecology)) + "\" cy=\"" + num(size - px(s.infrastructure)) +
           "\" r=\"3\" fill=\"steelblue\"><title>" + xml_escape(s.city_id) + "</title></circle>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace planlens::factors
