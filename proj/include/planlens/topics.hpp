#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "planlens/featurizer.hpp"

namespace planlens::topics {

inline constexpr std::size_t kTopicCount = 9;

/// Display names, in lexicon order.
const std::array<std::string, kTopicCount>& topic_names();
/// Column keys used in CSV headers (land_use, ..., industry).
const std::array<std::string, kTopicCount>& topic_keys();
/// Accepts a display name or a column key.
std::optional<std::size_t> topic_index(std::string_view name);

/// Nine curated key-term sets over lemmatized 1- and 2-grams.
struct Lexicon {
  std::array<std::set<std::string>, kTopicCount> terms;
  std::unordered_map<std::string, std::size_t> topic_of;
  std::vector<std::string> warnings;

  std::optional<std::size_t> find(const std::string& term) const;
  std::size_t size() const { return topic_of.size(); }
};

/// Lowercases, tokenizes and lemmatizes each word, so lexicon entries live in
/// the same term space as preprocessed documents.
std::string normalize_term(std::string_view raw);

/// CSV `topic,term`; '#' lines are comments. Terms are normalized; a term
/// listed twice under one topic is merged, under two topics is an error.
Lexicon parse_lexicon(std::string_view csv_text, const std::string& source = "lexicon");
Lexicon load_lexicon(const std::string& path);
/// The bundled nine-topic lexicon.
const Lexicon& default_lexicon();

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> tokens;
  std::vector<double> values;  // row-major, tokens.size() x dim
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> warnings;

  std::size_t size() const { return tokens.size(); }
  std::span<const double> vector(std::size_t row) const {
    return {values.data() + row * dim, dim};
  }
  const double* find(const std::string& token) const;
};

/// word2vec text format: optional `<count> <dim>` header line, then
/// `token v1 ... v_dim` per line. Without a header the first vector line
/// fixes the dimension.
EmbeddingTable parse_word_vectors(std::string_view text, const std::string& source = "vectors");
EmbeddingTable load_word_vectors(const std::string& path);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Candidate {
  std::string term;
  double score = 0.0;
  std::string nearest_seed;
};

struct Expansion {
  std::vector<Candidate> candidates;
  std::vector<std::string> missing_seeds;
};

/// Scores every non-seed token by its best cosine similarity to any seed and
/// returns the top k with score >= min_sim, best first, ties by term.
Expansion expand_seeds(std::span<const std::string> seeds, const EmbeddingTable& emb,
                       std::size_t k, double min_sim);

enum class CountMode { occurrences, distinct };
std::string to_string(CountMode mode);
CountMode parse_count_mode(const std::string& s);

struct TopicVector {
  std::string city_id;
  std::array<std::size_t, kTopicCount> counts{};
};

/// Per topic, the number of sequence terms (1- or 2-grams) in that topic.
/// 2-gram matches do not consume their constituent 1-grams.
TopicVector topic_counts(std::span<const std::string> terms, const Lexicon& lexicon,
                         CountMode mode = CountMode::occurrences, std::string city_id = {});

/// Per-topic median; even-length lists average the two middle values.
std::array<double, kTopicCount> median_topic_counts(std::span<const TopicVector> vectors);

struct CloudEntry {
  std::string term;
  double score = 0.0;
  std::optional<std::size_t> topic;
};

/// Top terms of one city's tf-idf row, ties broken by term, each tagged
/// with its lexicon topic.
std::vector<CloudEntry> wordcloud_data(const std::string& city_id,
                                       const featurizer::SparseMatrix& tfidf,
                                       const featurizer::Vocabulary& vocab,
                                       const Lexicon& lexicon, std::size_t top_n);

std::string lexicon_csv(const Lexicon& lexicon);
std::string topic_vectors_csv(std::span<const TopicVector> vectors);
/// Counts divided by each city's 1-gram term count.
std::string normalized_topic_vectors_csv(std::span<const TopicVector> vectors,
                                         std::span<const std::size_t> term_counts);
std::string median_csv(const std::array<double, kTopicCount>& medians);
nlohmann::json wordcloud_json(const std::string& city_id, std::span<const CloudEntry> entries);
std::string candidates_csv(std::string_view topic, std::span<const Candidate> candidates,
                           bool header = true);

}  // namespace planlens::topics
