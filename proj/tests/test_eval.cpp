#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "planlens/common.hpp"
#include "planlens/eval.hpp"
#include "planlens/synth.hpp"

using namespace planlens;
using featurizer::SparseMatrix;

namespace {

struct Table2x2 {
  int a, b, c, d;  // presence 1: label 1, label 0; presence 0: label 1, label 0
};

void expand(const Table2x2& t, std::vector<int>& presence, std::vector<int>& labels) {
  auto add = [&](int n, int p, int l) {
    for (int i = 0; i < n; ++i) {
      presence.push_back(p);
      labels.push_back(l);
    }
  };
  add(t.a, 1, 1);
  add(t.b, 1, 0);
  add(t.c, 0, 1);
  add(t.d, 0, 0);
}

// Chi-square upper tail with one degree of freedom.
double chi1_sf(double stat) { return std::erfc(std::sqrt(stat / 2.0)); }

struct Featurized {
  SparseMatrix x;
  std::vector<int> y;
  std::vector<std::string> terms;
};

Featurized featurize(const synth::PlantedCorpus& pc) {
  const auto c = corpus::build_corpus(pc.documents, pc.records, {});
  const auto vocab = featurizer::build_vocabulary(c, 0.1);
  return {featurizer::tfidf_transform(featurizer::count_matrix(c, vocab), vocab), c.labels(),
          vocab.terms};
}

}  // namespace

TEST_CASE("make_splits sizes and determinism") {
  std::vector<int> y(10, 0);
  for (int i = 0; i < 5; ++i) y[i] = 1;
  const auto splits = eval::make_splits(y, {});
  REQUIRE(splits.size() == 50);
  for (const auto& s : splits) {
    CHECK(s.test.size() == 2);
    CHECK(s.train.size() == 8);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 10);
  }
  const auto again = eval::make_splits(y, {});
  for (std::size_t k = 0; k < 50; ++k) CHECK(splits[k].test == again[k].test);
  eval::SplitPlan other;
  other.seed = 1;
  const auto changed = eval::make_splits(y, other);
  bool differs = false;
  for (std::size_t k = 0; k < 50; ++k) differs |= changed[k].test != splits[k].test;
  CHECK(differs);
}

TEST_CASE("make_splits stratifies") {
  std::vector<int> y{1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
  for (const auto& s : eval::make_splits(y, {})) {
    REQUIRE(s.test.size() == 2);
    CHECK(y[s.test[0]] + y[s.test[1]] == 1);
  }
  const std::vector<int> tiny{1, 0, 1, 0};
  CHECK_THROWS_AS(eval::make_splits(tiny, {}), InputError);
  const std::vector<int> one_negative{1, 1, 1, 1, 1, 1, 1, 1, 1, 0};
  CHECK_THROWS_AS(eval::make_splits(one_negative, {}), InputError);
}

TEST_CASE("metrics") {
  const std::vector<int> t{1, 1, 0, 0}, p{1, 0, 1, 0};
  const auto m = eval::metrics(t, p);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);
  const auto same = eval::metrics(t, t);
  CHECK((same.precision == 1.0 && same.recall == 1.0 && same.f1 == 1.0));
  const std::vector<int> none{0, 0, 0, 0};
  const auto z = eval::metrics(t, none);
  CHECK(z.precision == 0.0);
  CHECK(z.precision_undefined);
  CHECK(z.recall == 0.0);
  CHECK(!z.recall_undefined);
  CHECK(z.f1 == 0.0);
}

TEST_CASE("f1 is the harmonic mean") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(12), p(12);
    for (auto& v : t) v = rng.bernoulli(0.5);
    for (auto& v : p) v = rng.bernoulli(0.5);
    const auto m = eval::metrics(t, p);
    for (double v : {m.precision, m.recall, m.f1}) CHECK((v >= 0.0 && v <= 1.0));
    if (m.precision + m.recall > 0) {
      CHECK(m.f1 * (m.precision + m.recall) ==
            doctest::Approx(2 * m.precision * m.recall).epsilon(1e-15));
    }
  }
}

TEST_CASE("chi-square test") {
  std::vector<int> presence, labels;
  expand({10, 20, 30, 40}, presence, labels);
  const auto r = eval::chi_square_term(presence, labels);
  const double hand = 4.0 / 12 + 4.0 / 18 + 4.0 / 28 + 4.0 / 42;
  CHECK(std::abs(r.statistic - hand) <= 1e-9);
  CHECK(std::abs(r.p_value - chi1_sf(hand)) <= 1e-9);
  CHECK(r.statistic == doctest::Approx(0.794).epsilon(1e-3));
  CHECK(r.p_value == doctest::Approx(0.373).epsilon(1e-3));

  CHECK(std::abs(eval::chi_square_sf(3.841, 1) - 0.05) <= 1e-3);

  presence.clear();
  labels.clear();
  expand({10, 20, 20, 40}, presence, labels);
  const auto ind = eval::chi_square_term(presence, labels);
  CHECK(ind.statistic == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ind.p_value == doctest::Approx(1.0));

  const std::vector<int> ones(6, 1), lab{1, 0, 1, 0, 1, 0};
  const auto deg = eval::chi_square_term(ones, lab);
  CHECK(deg.degenerate);
  CHECK(deg.statistic == 0.0);
  CHECK(deg.p_value == 1.0);

  const std::vector<int> short_vec{1};
  CHECK_THROWS_AS(eval::chi_square_term(short_vec, lab), InputError);
}

TEST_CASE("chi-square tail matches the closed form over a range") {
  for (double s : {0.0, 1e-6, 0.1, 0.5, 1.0, 2.0, 3.841, 6.635, 10.0, 25.0, 60.0}) {
    CHECK(std::abs(eval::chi_square_sf(s, 1) - chi1_sf(s)) <= 1e-10);
  }
  for (double x : {0.1, 1.0, 4.0, 12.0}) {
    CHECK(eval::regularized_gamma_p(1.0, x) == doctest::Approx(1 - std::exp(-x)).epsilon(1e-12));
    CHECK(eval::regularized_gamma_p(2.5, x) + eval::regularized_gamma_q(2.5, x) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("chi-square is invariant to code swaps") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p(40), l(40), pf(40), lf(40);
    for (std::size_t i = 0; i < 40; ++i) {
      p[i] = rng.bernoulli(0.4);
      l[i] = rng.bernoulli(0.6);
      pf[i] = 1 - p[i];
      lf[i] = 1 - l[i];
    }
    const double s = eval::chi_square_term(p, l).statistic;
    CHECK(eval::chi_square_term(pf, l).statistic == doctest::Approx(s).epsilon(1e-12));
    CHECK(eval::chi_square_term(p, lf).statistic == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("chi-square p-values are calibrated under independence") {
  Rng rng(1234);
  std::vector<int> labels(100, 0), presence(100, 0);
  for (int i = 0; i < 50; ++i) labels[i] = 1;
  for (int i = 0; i < 30; ++i) presence[i] = 1;
  int rejected = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    rng.shuffle(std::span<int>(presence));
    rejected += eval::chi_square_term(presence, labels).p_value < 0.05;
  }
  const double rate = rejected / 1000.0;
  CHECK(rate >= 0.03);
  CHECK(rate <= 0.08);
}

TEST_CASE("lambda grid") {
  const auto x = SparseMatrix::from_dense({{1, 0}, {0, 1}, {1, 1}, {0, 0}});
  const std::vector<int> y{1, 0, 1, 0};
  const auto grid = eval::lambda_grid(x, y, glm::WeightMode::balanced, 5, 1e-2);
  REQUIRE(grid.size() == 5);
  CHECK(grid.front() == glm::lambda_max(x, y, glm::WeightMode::balanced));
  CHECK(grid.back() == doctest::Approx(grid.front() * 1e-2));
  for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] < grid[k - 1]);
}

TEST_CASE("LOOCV selection") {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({i < 5 ? 1.0 : 0.0});
    y.push_back(i < 5);
  }
  const auto x = SparseMatrix::from_dense(rows);
  const double lmax = glm::lambda_max(x, y, glm::WeightMode::balanced);
  glm::FitConfig cfg;

  SUBCASE("single candidate") {
    const std::vector<double> grid{2 * lmax};
    const auto r = eval::select_lambda_loocv(x, y, cfg, grid);
    CHECK(r.lambda == 2 * lmax);
    CHECK(r.path[0].nnz() == 0);
  }
  SUBCASE("separable data prefers the small lambda") {
    const std::vector<double> grid{2 * lmax, 1e-4};
    const auto r = eval::select_lambda_loocv(x, y, cfg, grid);
    CHECK(r.lambda == 1e-4);
    CHECK(r.scores[1] == 1.0);
  }
  SUBCASE("ties go to the larger lambda") {
    const std::vector<double> grid{4 * lmax, 2 * lmax};
    const auto r = eval::select_lambda_loocv(x, y, cfg, grid);
    CHECK(r.index == 0);
    CHECK(r.lambda == 4 * lmax);
  }
  SUBCASE("grid must decrease") {
    const std::vector<double> grid{1e-4, 2 * lmax};
    CHECK_THROWS_AS(eval::select_lambda_loocv(x, y, cfg, grid), InputError);
  }
}

TEST_CASE("LOOCV agrees with brute-force refits") {
  synth::PlantedCorpusSpec spec;
  spec.n_docs = 40;
  spec.seed = 5;
  spec.p_positive = 0.6;
  spec.p_negative = 0.2;
  const auto f = featurize(synth::planted_corpus(spec));
  glm::FitConfig cfg;
  const auto grid = eval::lambda_grid(f.x, f.y, cfg.weight_mode, 8, 1e-2);
  const auto r = eval::select_lambda_loocv(f.x, f.y, cfg, grid);

  // Score every lambda by cold refits on n - 1 samples with the full-sample weights.
  const auto weights = glm::class_weights(f.y, cfg.weight_mode).per_sample;
  std::vector<double> acc(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    glm::FitConfig c = cfg;
    c.lambda = grid[k];
    int right = 0;
    for (std::size_t i = 0; i < f.y.size(); ++i) {
      std::vector<std::size_t> keep;
      for (std::size_t r2 = 0; r2 < f.y.size(); ++r2) {
        if (r2 != i) keep.push_back(r2);
      }
      std::vector<int> yk;
      std::vector<double> wk;
      for (auto r2 : keep) {
        yk.push_back(f.y[r2]);
        wk.push_back(weights[r2]);
      }
      const auto m = glm::fit(f.x.select_rows(keep), yk, wk, c);
      const std::vector<std::size_t> one{i};
      right += glm::predict(m, f.x.select_rows(one))[0] == f.y[i];
    }
    acc[k] = right / static_cast<double>(f.y.size());
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (acc[k] > acc[best]) best = k;
  }
  CHECK(r.index == best);
  CHECK(r.scores[best] == doctest::Approx(acc[best]));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!std::isnan(r.scores[k])) CHECK(r.scores[k] == doctest::Approx(acc[k]));
  }
}

TEST_CASE("evaluate_repeated on a small planted corpus") {
  synth::PlantedCorpusSpec spec;
  spec.n_docs = 100;
  const auto f = featurize(synth::planted_corpus(spec));
  eval::EvalOptions opt;
  opt.plan.n_splits = 8;
  opt.grid_points = 15;
  opt.grid_ratio = 1e-2;
  const auto report = eval::evaluate_repeated(f.x, f.y, f.terms, {}, opt);

  REQUIRE(report.per_split.size() == 8);
  double f1 = 0;
  for (const auto& s : report.per_split) f1 += s.metrics.f1;
  CHECK(report.mean_f1 == doctest::Approx(f1 / 8).epsilon(1e-15));
  CHECK(report.mean_f1 >= 0.9);

  std::set<std::string> top;
  for (std::size_t k = 0; k < 5 && k < report.predictive_terms.size(); ++k) {
    top.insert(report.predictive_terms[k].term);
  }
  for (const auto& t : spec.planted) CHECK(top.contains(t));

  for (std::size_t j = 0; j < f.terms.size(); ++j) {
    const bool listed = std::any_of(report.predictive_terms.begin(), report.predictive_terms.end(),
                                    [&](const auto& ts) { return ts.term == f.terms[j]; });
    CHECK(listed == (report.averaged_coefficients[j] != 0.0));
  }

  SUBCASE("rerun is identical, including with more threads") {
    opt.threads = 3;
    const auto again = eval::evaluate_repeated(f.x, f.y, f.terms, {}, opt);
    CHECK(again.averaged_coefficients == report.averaged_coefficients);
    CHECK(again.mean_f1 == report.mean_f1);
    CHECK(eval::predictive_terms_csv(again) == eval::predictive_terms_csv(report));
  }
}

TEST_CASE("label-randomized corpus carries no signal") {
  synth::PlantedCorpusSpec spec;
  spec.n_docs = 60;
  auto pc = synth::planted_corpus(spec);
  auto f = featurize(pc);
  Rng rng(99);
  rng.shuffle(std::span<int>(f.y));
  eval::EvalOptions opt;
  opt.plan.n_splits = 6;
  opt.grid_points = 10;
  opt.grid_ratio = 1e-2;
  const auto report = eval::evaluate_repeated(f.x, f.y, f.terms, {}, opt);
  const double base = std::count(f.y.begin(), f.y.end(), 1) / static_cast<double>(f.y.size());
  const double always_positive_f1 = 2 * base / (1 + base);
  CHECK(std::abs(report.mean_f1 - always_positive_f1) <= 0.15);
  for (const auto& t : report.predictive_terms) {
    if (std::find(spec.planted.begin(), spec.planted.end(), t.term) != spec.planted.end()) {
      CHECK(t.p_value >= 0.01);
    }
  }
}
