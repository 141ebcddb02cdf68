#include "doctest.h"

#include <cmath>

#include "planlens/common.hpp"
#include "planlens/factors.hpp"
#include "planlens/synth.hpp"
#include "planlens/topics.hpp"

using namespace planlens;
using factors::Quadrant;

namespace {

std::vector<std::string> topic_labels() {
  const auto& names = topics::topic_names();
  return {names.begin(), names.end()};
}

factors::CorrelationMatrix exact_block() {
  return {topic_labels(), synth::two_block_correlation(0.9), {}};
}

// Pearson r by direct summation in long double.
long double pearson(const Eigen::MatrixXd& m, int a, int b) {
  const long n = m.rows();
  long double ma = 0, mb = 0;
  for (long i = 0; i < n; ++i) {
    ma += m(i, a);
    mb += m(i, b);
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (long i = 0; i < n; ++i) {
    sab += (m(i, a) - ma) * (m(i, b) - mb);
    saa += (m(i, a) - ma) * (m(i, a) - ma);
    sbb += (m(i, b) - mb) * (m(i, b) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("correlations") {
  Eigen::MatrixXd m(5, 2);
  m << 1.0, 2.5, 2.0, 0.5, 4.0, 3.0, 3.5, 7.25, 0.25, 1.0;
  const auto r = factors::topic_correlations(m, {"a", "b"});
  CHECK(r.values(0, 0) == 1.0);
  CHECK(std::abs(r.values(0, 1) - static_cast<double>(pearson(m, 0, 1))) <= 1e-15);
  CHECK(r.values(0, 1) == r.values(1, 0));

  Eigen::MatrixXd neg(4, 2);
  neg.col(0) << 1, 3, 2, 7;
  neg.col(1) = -neg.col(0);
  CHECK(factors::topic_correlations(neg, {"x", "y"}).values(0, 1) ==
        doctest::Approx(-1.0).epsilon(1e-15));

  Eigen::MatrixXd flat(4, 2);
  flat << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto d = factors::topic_correlations(flat, {"x", "c"});
  CHECK(d.degenerate());
  CHECK(d.zero_variance == std::vector<std::string>{"c"});
  CHECK(d.values(0, 1) == 0.0);
  CHECK(d.values(1, 1) == 1.0);

  CHECK_THROWS_AS(factors::topic_correlations(Eigen::MatrixXd::Ones(2, 2), {"x", "y"}),
                  InputError);
}

TEST_CASE("two-block structure is recovered") {
  const auto model = factors::fit_factor_model(exact_block());
  CHECK(model.converged);
  for (int t = 0; t < 9; ++t) {
    const int own = synth::ecology_topic(t) ? 0 : 1;
    CHECK(std::abs(model.loadings(t, own)) > 0.8);
    CHECK(std::abs(model.loadings(t, 1 - own)) < 0.2);
    CHECK(model.communalities(t) <= 1.0 + 1e-9);
  }
  CHECK(model.reproduction_residual() <= 0.05);

  const auto data = synth::two_block_topic_data(500, 42);
  const auto sample = factors::fit_factor_model(factors::topic_correlations(data, topic_labels()));
  for (int t = 0; t < 9; ++t) {
    const int own = synth::ecology_topic(t) ? 0 : 1;
    CHECK(std::abs(sample.loadings(t, own)) > 0.8);
    CHECK(std::abs(sample.loadings(t, 1 - own)) < 0.2);
  }
}

TEST_CASE("varimax keeps communalities") {
  factors::FactorOptions none;
  none.rotation = factors::Rotation::none;
  const auto data = synth::two_block_topic_data(300, 7, 0.6);
  const auto r = factors::topic_correlations(data, topic_labels());
  const auto raw = factors::fit_factor_model(r, none);
  const Eigen::MatrixXd rotated = factors::varimax(raw.loadings);
  const Eigen::VectorXd before = raw.loadings.rowwise().squaredNorm();
  const Eigen::VectorXd after = rotated.rowwise().squaredNorm();
  CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("permuting variables permutes loading rows") {
  const auto data = synth::two_block_topic_data(400, 3);
  const auto labels = topic_labels();
  const auto base = factors::fit_factor_model(factors::topic_correlations(data, labels));
  const std::vector<int> perm{8, 2, 5, 0, 7, 1, 4, 6, 3};
  Eigen::MatrixXd shuffled(data.rows(), 9);
  std::vector<std::string> shuffled_labels;
  for (int k = 0; k < 9; ++k) {
    shuffled.col(k) = data.col(perm[k]);
    shuffled_labels.push_back(labels[perm[k]]);
  }
  const auto moved =
      factors::fit_factor_model(factors::topic_correlations(shuffled, shuffled_labels));
  for (int k = 0; k < 9; ++k) {
    for (int f = 0; f < 2; ++f) {
      CHECK(moved.loadings(k, f) == doctest::Approx(base.loadings(perm[k], f)).epsilon(1e-7));
    }
  }
}

TEST_CASE("identity correlation has no factor structure") {
  const factors::CorrelationMatrix r{topic_labels(), Eigen::MatrixXd::Identity(9, 9), {}};
  const auto model = factors::fit_factor_model(r);
  CHECK(model.no_factor_structure);
  CHECK(model.communalities.maxCoeff() <= model.options.eigen_floor);
}

TEST_CASE("quadrants") {
  CHECK(factors::quadrant(2.1, 1.3) == Quadrant::II);
  CHECK(factors::quadrant(-1.0, 2.0) == Quadrant::I);
  CHECK(factors::quadrant(-1.0, -2.0) == Quadrant::III);
  CHECK(factors::quadrant(1.0, -2.0) == Quadrant::IV);
  CHECK(factors::quadrant(0.0, 0.0) == Quadrant::III);
  CHECK(factors::quadrant(0.0, 1.0) == Quadrant::I);
  CHECK(factors::quadrant(1.0, 0.0) == Quadrant::IV);
  CHECK(factors::to_string(Quadrant::II) == "II");
}

TEST_CASE("factor scores") {
  Eigen::MatrixXd data = synth::two_block_topic_data(200, 9);
  // Last row at the column means of the rest, so it sits at the centroid
  // of the full matrix.
  const Eigen::RowVectorXd centre = data.topRows(199).colwise().mean();
  data.row(199) = centre;
  const auto r = factors::topic_correlations(data, topic_labels());
  const auto model = factors::fit_factor_model(r);
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back("c" + std::to_string(i));
  const auto s = factors::factor_scores(model, data, ids);
  REQUIRE(s.scores.size() == 200);
  double me = 0, mi = 0;
  for (const auto& sc : s.scores) {
    me += sc.ecology;
    mi += sc.infrastructure;
    CHECK(sc.quadrant == factors::quadrant(sc.ecology, sc.infrastructure));
  }
  CHECK(std::abs(me / 200) <= 1e-9);
  CHECK(std::abs(mi / 200) <= 1e-9);
  CHECK(std::abs(s.scores.back().ecology) <= 1e-9);
  CHECK(std::abs(s.scores.back().infrastructure) <= 1e-9);
  CHECK(!s.pseudo_inverse);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(factors::percentile(v, 0.25) == 1.75);
  CHECK(factors::percentile(v, 0.75) == 3.25);

  std::vector<corpus::CityRecord> one{{"a", 1, 100.0, {}, {}, {}}};
  const auto t1 = factors::summary_stats(one);
  const auto& pop = t1.columns[0];
  CHECK(pop.variable == "population");
  CHECK(pop.n == 1);
  CHECK(pop.mean == 100.0);
  CHECK(pop.min == 100.0);
  CHECK(pop.max == 100.0);
  CHECK(!pop.sd.has_value());

  std::vector<corpus::CityRecord> recs;
  for (int i = 0; i < 6; ++i) {
    corpus::CityRecord r{"c" + std::to_string(i), i % 2, 10.0 * i, {}, {}, {}};
    if (i != 2) r.percent_reduction = i == 5 ? 504.0 : 20.0 * i;
    recs.push_back(r);
  }
  const auto t = factors::summary_stats(recs);
  CHECK(t.columns[0].n == 6);
  for (const auto& c : t.columns) {
    if (c.variable == "percent_reduction") CHECK(c.n == 5);
  }
  REQUIRE(t.flagged_percent_reduction.size() == 1);
  CHECK(t.flagged_percent_reduction[0].second == 504.0);
  CHECK(t.columns[0].sd == doctest::Approx(std::sqrt(350.0)));
}
