#include "doctest.h"

#include <algorithm>
#include <cctype>
#include <map>

#include "planlens/corpus.hpp"
#include "planlens/resources.hpp"
#include "support.hpp"

using namespace planlens;
using corpus::tokenize;
using corpus::lemmatize;
using Strings = std::vector<std::string>;

TEST_CASE("tokenize splits on digits and punctuation") {
  CHECK(tokenize("Net-zero by 2050!") == Strings{"net", "zero", "by"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("CO2e reductions") == Strings{"co", "reductions"});
  CHECK(tokenize("a b c x").empty());
  CHECK(tokenize("Émissions ÉCOLE") == Strings{"émissions", "école"});
}

TEST_CASE("lemmatize") {
  CHECK(lemmatize("emissions") == "emission");
  CHECK(lemmatize("energy") == "energy");
  CHECK(lemmatize("cities") == "city");
  CHECK(lemmatize("buildings") == "building");
  CHECK(lemmatize("reductions") == "reduction");
}

TEST_CASE("lemmatize is idempotent") {
  SUBCASE("lemma table entries") {
    const std::string_view table = resources::lemmas_en();
    std::size_t pos = 0, checked = 0;
    while (pos < table.size()) {
      std::size_t end = table.find('\n', pos);
      if (end == std::string_view::npos) end = table.size();
      std::string_view line = table.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      for (std::string_view word : {line.substr(0, tab), line.substr(tab + 1)}) {
        const std::string once = lemmatize(word);
        CHECK_MESSAGE(lemmatize(once) == once, word);
      }
      ++checked;
    }
    CHECK(checked > 100);
  }
  SUBCASE("random strings") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
      std::string word(2 + rng.below(10), 'a');
      for (char& c : word) c = static_cast<char>('a' + rng.below(26));
      if (i % 3 == 0) word += std::vector<std::string>{"s", "es", "ies", "ing", "ed"}[rng.below(5)];
      const std::string once = lemmatize(word);
      CHECK_MESSAGE(lemmatize(once) == once, word);
    }
  }
}

TEST_CASE("preprocess") {
  const corpus::TermSet the{"the"};
  CHECK(corpus::preprocess({"x", "reduce the emissions", ""}, the) ==
        Strings{"reduce", "emission", "reduce emission"});
  CHECK(corpus::preprocess({"x", "The the THE", ""}, the).empty());
  CHECK(corpus::preprocess({"x", "ghg reduction", ""}, the) ==
        Strings{"ghg", "reduction", "ghg reduction"});
}

TEST_CASE("preprocess is pure and emits clean terms") {
  const std::string text =
      "By 2035, the City's Climate Action Plan (CAP) will cut GHG emissions 45%; "
      "buildings, vehicles and waste-water systems all matter.";
  const auto& stop = corpus::default_stopwords();
  const auto first = corpus::preprocess({"x", text, ""}, stop);
  CHECK(first == corpus::preprocess({"x", text, ""}, stop));
  CHECK(!first.empty());
  for (const auto& term : first) {
    for (char c : term) {
      CHECK_MESSAGE((std::islower(static_cast<unsigned char>(c)) || c == ' '), term);
    }
  }
}

TEST_CASE("proper nouns are detected from capitalization") {
  std::vector<corpus::RawDocument> docs{
      {"a", "We met in Springfield today. Later the plan for Springfield grew.", ""},
      {"b", "Our plan cites Springfield and the Energy office, so energy matters.", ""},
  };
  const auto proper = corpus::detect_proper_nouns(docs, 0.8);
  CHECK(proper.contains("springfield"));
  CHECK(!proper.contains("energy"));
  CHECK(!proper.contains("plan"));
}

TEST_CASE("labels parsing") {
  const auto recs = corpus::parse_labels(
      "city_id,label,population,percent_reduction\n"
      "a,1,1000,80\n"
      "b,0,,\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].population == 1000.0);
  CHECK(!recs[1].population.has_value());
  CHECK_THROWS_AS(corpus::parse_labels("city_id,label\na,2\n"), InputError);
  CHECK_THROWS_AS(corpus::parse_labels("city_id,label\na,1\na,0\n"), InputError);
  CHECK_THROWS_AS(corpus::parse_labels("city,label\na,1\n"), InputError);
}

TEST_CASE("load_corpus") {
  testing::TempDir dir("corpus");

  SUBCASE("files of one city are concatenated with a break") {
    dir.write("docs/a__1.txt", std::string(60, 'x'));
    dir.write("docs/a__2.txt", std::string(60, 'y'));
    const auto labels = dir.write("labels.csv", "city_id,label\na,1\n");
    const auto c = corpus::load_corpus(dir / "docs", labels, {});
    REQUIRE(c.size() == 1);
    CHECK(c.records[0].city_id == "a");
    CHECK(c.terms("a") == Strings{std::string(60, 'x'), std::string(60, 'y')});
    CHECK(c.excluded.empty());
  }
  SUBCASE("short documents are excluded") {
    dir.write("docs/b.txt", "hi");
    dir.write("docs/d.txt", std::string(70, 'z'));
    const auto labels = dir.write("labels.csv", "city_id,label\nb,0\nd,1\n");
    const auto c = corpus::load_corpus(dir / "docs", labels, {});
    CHECK(c.city_ids() == Strings{"d"});
    REQUIRE(c.excluded.size() == 1);
    CHECK(c.excluded[0].city_id == "b");
  }
  SUBCASE("missing label") {
    dir.write("docs/c.txt", std::string(60, 'c'));
    const auto labels = dir.write("labels.csv", "city_id,label\n");
    CHECK_THROWS_WITH_AS(corpus::load_corpus(dir / "docs", labels, {}),
                         "no label for city c", InputError);
  }
  SUBCASE("missing directory") {
    const auto labels = dir.write("labels.csv", "city_id,label\n");
    CHECK_THROWS_AS(corpus::load_corpus(dir / "nope", labels, {}), InputError);
  }
}

TEST_CASE("file order leaves the unigram multiset unchanged") {
  const std::string f1 = "Solar panels on every school roof reduce emissions quickly.";
  const std::string f2 = "Electric buses and bike lanes change transport habits.";
  const std::vector<corpus::CityRecord> labels{{"a", 1, {}, {}, {}, {}}};
  auto unigrams = [&](std::vector<corpus::RawDocument> docs) {
    const auto c = corpus::build_corpus(docs, labels, {});
    Strings out;
    for (const auto& t : c.terms("a")) {
      if (t.find(' ') == std::string::npos) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(unigrams({{"a", f1, "1"}, {"a", f2, "2"}}) ==
        unigrams({{"a", f2, "2"}, {"a", f1, "1"}}));
}

TEST_CASE("corpus json round trip") {
  const std::vector<corpus::RawDocument> docs{
      {"a", "Reduce emissions from buildings and transport across the region.", ""},
      {"b", "Hi", ""}};
  const std::vector<corpus::CityRecord> labels{{"a", 1, 10.0, {}, 55.0, {}},
                                               {"b", 0, {}, {}, {}, {}}};
  const auto c = corpus::build_corpus(docs, labels, {});
  const auto back = corpus::corpus_from_json(corpus::to_json(c));
  CHECK(back.city_ids() == c.city_ids());
  CHECK(back.terms("a") == c.terms("a"));
  CHECK(back.records[0].population == 10.0);
  CHECK(back.excluded.size() == 1);
}

TEST_CASE("character counting is by code point") {
  CHECK(corpus::count_characters("abc") == 3);
  CHECK(corpus::count_characters("énergie") == 7);
  CHECK(corpus::unigram_count(Strings{"a", "b", "a b"}) == 2);
}
