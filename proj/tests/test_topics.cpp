#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "planlens/common.hpp"
#include "planlens/featurizer.hpp"
#include "planlens/topics.hpp"
#include "planlens/synth.hpp"

using namespace planlens;
using topics::kTopicCount;
using Strings = std::vector<std::string>;

namespace {

std::size_t idx(const char* name) { return *topics::topic_index(name); }

// Every topic gets one filler term so that small lexicons validate.
std::string lexicon_with(const std::string& extra) {
  std::string text = "topic,term\n";
  for (const auto& key : topics::topic_keys()) text += key + ",filler" + key + "\n";
  return text + extra;
}

corpus::Corpus mini_corpus() {
  return corpus::load_corpus(PLANLENS_SOURCE_DIR "/data/mini/docs",
                             PLANLENS_SOURCE_DIR "/data/mini/labels.csv", {});
}

}  // namespace

TEST_CASE("bundled lexicon") {
  const auto& lex = topics::default_lexicon();
  CHECK(lex.terms[idx("heating")].contains("boiler"));
  CHECK(lex.find("parking") == idx("transportation"));
  CHECK(lex.find("house") == idx("building"));
  for (const auto& set : lex.terms) CHECK(!set.empty());
  for (const auto& [term, t] : lex.topic_of) {
    CHECK(topics::normalize_term(term) == term);
    CHECK(lex.terms[t].contains(term));
  }
  CHECK(topics::topic_keys()[0] == "land_use");
  CHECK(topics::topic_index("pollution/waste") == topics::topic_index("pollution_waste"));
}

TEST_CASE("lexicon validation") {
  CHECK_THROWS_WITH_AS(topics::parse_lexicon(lexicon_with("heating,boiler\nbuilding,boiler\n")),
                       doctest::Contains("duplicate term 'boiler'"), InputError);
  std::string eight = "topic,term\n";
  for (std::size_t t = 0; t + 1 < kTopicCount; ++t) {
    eight += topics::topic_keys()[t] + ",filler" + topics::topic_keys()[t] + "\n";
  }
  CHECK_THROWS_WITH_AS(topics::parse_lexicon(eight), doctest::Contains("industry"), InputError);
  CHECK_THROWS_WITH_AS(topics::parse_lexicon(lexicon_with("weather,rain\n")),
                       doctest::Contains("unknown topic 'weather'"), InputError);
  const auto ok = topics::parse_lexicon(lexicon_with("heating,Boilers\nheating,boiler\n"));
  CHECK(ok.find("boiler") == idx("heating"));
}

TEST_CASE("word vector loading") {
  const auto e = topics::parse_word_vectors("2 3\na 1 0 0\nb 0 1 0\n");
  CHECK(e.dim == 3);
  CHECK(e.size() == 2);
  const auto h = topics::parse_word_vectors("a 1 2\nb 3 4\n");
  CHECK(h.dim == 2);
  CHECK(h.size() == 2);
  CHECK_THROWS_WITH_AS(topics::parse_word_vectors("2 3\na 1 0 0\nb 0 1\n", "v"),
                       doctest::Contains("v:3"), InputError);
  CHECK_THROWS_AS(topics::parse_word_vectors("a 1 x\n"), InputError);
  const auto dup = topics::parse_word_vectors("a 1 0\na 0 1\n");
  CHECK(dup.size() == 1);
  CHECK(dup.vector(0)[0] == 1.0);
  CHECK(!dup.warnings.empty());
}

TEST_CASE("cosine similarity") {
  using V = std::vector<double>;
  CHECK(topics::cosine_similarity(V{1, 0}, V{0, 1}) == 0.0);
  CHECK(topics::cosine_similarity(V{1, 2}, V{2, 4}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(topics::cosine_similarity(V{1, 1}, V{1, 0}) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(topics::cosine_similarity(V{0, 0}, V{1, 0}), InputError);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    V a(1 + rng.below(50));
    for (double& v : a) v = rng.normal();
    CHECK(std::abs(topics::cosine_similarity(a, a) - 1.0) <= 1e-12);
  }
}

TEST_CASE("seed expansion") {
  const auto emb = topics::parse_word_vectors(
      "a 1 2 0\n"
      "b 2 4 0\n"
      "c 1 0 0\n"
      "d 0 0 1\n"
      "e 1 1 1\n");
  const Strings seeds{"a"};
  const auto r = topics::expand_seeds(seeds, emb, 10, -1.0);
  REQUIRE(!r.candidates.empty());
  CHECK(r.candidates[0].term == "b");
  CHECK(r.candidates[0].score == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(topics::expand_seeds(seeds, emb, 0, 0.0).candidates.empty());

  SUBCASE("ranking matches exhaustive pairwise scores") {
    const Strings two{"a", "d", "zz"};
    const auto got = topics::expand_seeds(two, emb, 5, 0.1);
    CHECK(got.missing_seeds == Strings{"zz"});
    std::vector<std::pair<double, std::string>> want;
    for (std::size_t r2 = 0; r2 < emb.size(); ++r2) {
      const auto& tok = emb.tokens[r2];
      if (tok == "a" || tok == "d") continue;
      double best = -1;
      for (const char* s : {"a", "d"}) {
        best = std::max(best, topics::cosine_similarity(emb.vector(r2), emb.vector(emb.index.at(s))));
      }
      if (best >= 0.1) want.emplace_back(-best, tok);
    }
    std::sort(want.begin(), want.end());
    REQUIRE(got.candidates.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(got.candidates[k].term == want[k].second);
      CHECK(got.candidates[k].score == -want[k].first);
      CHECK(got.candidates[k].score >= 0.1);
      CHECK(got.candidates[k].score <= 1.0 + 1e-15);
    }
  }
  const Strings absent{"x", "y"};
  CHECK_THROWS_WITH_AS(topics::expand_seeds(absent, emb, 3, 0.0), doctest::Contains("x, y"),
                       InputError);
}

TEST_CASE("topic counts") {
  const auto& lex = topics::default_lexicon();
  const auto v = topics::topic_counts(Strings{"boiler", "furnace", "heat", "house"}, lex);
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    const std::size_t want = t == idx("heating") ? 3 : t == idx("building") ? 1 : 0;
    CHECK(v.counts[t] == want);
  }
  const auto empty = topics::topic_counts(Strings{}, lex);
  for (auto c : empty.counts) CHECK(c == 0);
  const auto off = topics::topic_counts(Strings{"carbon offset", "offset"}, lex);
  CHECK(off.counts[idx("offsets")] == 2);
  const auto distinct = topics::topic_counts(Strings{"boiler", "boiler", "heat"}, lex,
                                             topics::CountMode::distinct);
  CHECK(distinct.counts[idx("heating")] == 2);
}

TEST_CASE("topic counts are additive and total the lexicon hits") {
  const auto& lex = topics::default_lexicon();
  Strings pool;
  for (const auto& [term, t] : lex.topic_of) pool.push_back(term);
  std::sort(pool.begin(), pool.end());
  for (const auto& w : synth::noise_words()) pool.push_back(w);
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    Strings seq(rng.below(80));
    for (auto& s : seq) s = pool[rng.below(pool.size())];
    const std::size_t cut = seq.empty() ? 0 : rng.below(seq.size() + 1);
    const Strings a(seq.begin(), seq.begin() + cut), b(seq.begin() + cut, seq.end());
    const auto whole = topics::topic_counts(seq, lex);
    const auto ca = topics::topic_counts(a, lex), cb = topics::topic_counts(b, lex);
    std::size_t total = 0, hits = 0;
    for (std::size_t t = 0; t < kTopicCount; ++t) {
      CHECK(whole.counts[t] == ca.counts[t] + cb.counts[t]);
      total += whole.counts[t];
    }
    for (const auto& s : seq) hits += lex.find(s).has_value();
    CHECK(total == hits);
  }
}

TEST_CASE("median topic counts") {
  auto vec = [](std::size_t heating) {
    topics::TopicVector v;
    v.counts[idx("heating")] = heating;
    return v;
  };
  const std::vector<topics::TopicVector> odd{vec(0), vec(5), vec(2)};
  CHECK(topics::median_topic_counts(odd)[idx("heating")] == 2.0);
  const std::vector<topics::TopicVector> even{vec(1), vec(3)};
  CHECK(topics::median_topic_counts(even)[idx("heating")] == 2.0);
  CHECK_THROWS_AS(topics::median_topic_counts(std::vector<topics::TopicVector>{}), InputError);
}

TEST_CASE("word cloud data") {
  const auto& lex = topics::default_lexicon();
  featurizer::Vocabulary vocab;
  vocab.terms = {"mayor", "parking", "zzz"};
  const auto x = featurizer::SparseMatrix::from_dense({{0, 0.4, 0}, {0, 0, 0}, {0.5, 0.2, 0.5}});
  auto m = x;
  m.row_ids = {"a", "b", "c"};
  const auto one = topics::wordcloud_data("a", m, vocab, lex, 10);
  REQUIRE(one.size() == 1);
  CHECK(one[0].term == "parking");
  CHECK(one[0].topic == idx("transportation"));
  CHECK(topics::wordcloud_data("b", m, vocab, lex, 10).empty());
  const auto ties = topics::wordcloud_data("c", m, vocab, lex, 2);
  REQUIRE(ties.size() == 2);
  CHECK(ties[0].term == "mayor");
  CHECK(ties[1].term == "zzz");
  CHECK(!ties[0].topic.has_value());
  CHECK_THROWS_AS(topics::wordcloud_data("nope", m, vocab, lex, 3), InputError);
}

TEST_CASE("mini corpus golden topic outputs") {
  const auto c = mini_corpus();
  const auto& lex = topics::default_lexicon();
  std::vector<topics::TopicVector> vectors;
  for (const auto& rec : c.records) {
    vectors.push_back(topics::topic_counts(c.terms(rec.city_id), lex,
                                           topics::CountMode::occurrences, rec.city_id));
  }
  CHECK(topics::topic_vectors_csv(vectors) ==
        read_file(PLANLENS_SOURCE_DIR "/tests/golden/mini_topic_vectors.csv"));

  // Sort-based median oracle.
  const auto medians = topics::median_topic_counts(vectors);
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    std::vector<double> col;
    for (const auto& v : vectors) col.push_back(static_cast<double>(v.counts[t]));
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    CHECK(medians[t] == (n % 2 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2));
  }
  CHECK(topics::median_csv(medians) ==
        read_file(PLANLENS_SOURCE_DIR "/tests/golden/mini_median_counts.csv"));

  const auto vocab = featurizer::build_vocabulary(c, 0.10);
  const auto x = featurizer::tfidf_transform(featurizer::count_matrix(c, vocab), vocab);
  const auto cloud = topics::wordcloud_data(c.records.front().city_id, x, vocab, lex, 10);
  CHECK(topics::wordcloud_json(c.records.front().city_id, cloud).dump(1) + "\n" ==
        read_file(PLANLENS_SOURCE_DIR "/tests/golden/mini_wordcloud_top10.json"));
}

TEST_CASE("noise words stay outside the lexicon and stopwords") {
  const auto& lex = topics::default_lexicon();
  const auto& stop = corpus::default_stopwords();
  for (const auto& w : synth::noise_words()) {
    CHECK_MESSAGE(!lex.find(w).has_value(), w);
    CHECK_MESSAGE(!stop.contains(w), w);
    CHECK_MESSAGE(corpus::lemmatize(w) == w, w);
  }
}
