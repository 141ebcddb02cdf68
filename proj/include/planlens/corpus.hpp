#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace planlens::corpus {

struct RawDocument {
  std::string city_id;
  std::string text;
  std::string source_path;
};

struct CityRecord {
  std::string city_id;
  int label = 0;  // 1 = economy-wide net-zero pledge
  std::optional<double> population;
  std::optional<double> baseline_year;
  std::optional<double> percent_reduction;
  std::optional<double> emis_per_capita;
};

struct Exclusion {
  std::string city_id;
  std::string reason;
};

using TermSet = std::unordered_set<std::string>;

/// Preprocessed corpus: one term sequence (1-grams and 2-grams) per city.
struct Corpus {
  std::vector<CityRecord> records;  // sorted by city_id
  std::map<std::string, std::vector<std::string>> term_sequences;
  std::vector<Exclusion> excluded;
  /// Tokens dropped by the capitalization heuristic, sorted.
  std::vector<std::string> proper_nouns;

  std::size_t size() const { return records.size(); }
  std::vector<std::string> city_ids() const;
  std::vector<int> labels() const;
  const std::vector<std::string>& terms(const std::string& city_id) const;
};

struct PreprocessOptions {
  TermSet stopwords;  // empty means the bundled list
  bool remove_proper_nouns = true;
  /// A token is a proper noun when more than this share of its non-initial
  /// occurrences are Titlecase.
  double proper_noun_threshold = 0.8;
  bool bigrams = true;
  std::size_t min_chars = 50;
};

/// Stopwords and proper nouns removed during preprocessing.
struct TermFilter {
  const TermSet* stopwords = nullptr;
  const TermSet* proper_nouns = nullptr;
};

const TermSet& default_stopwords();
/// One entry per line; '#' starts a comment line.
TermSet parse_stopwords(std::string_view text);
TermSet load_stopwords(const std::string& path);

/// Maximal runs of letters, lowercased, with runs shorter than two letters
/// dropped. Digits and punctuation separate tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Dictionary root from the bundled lemma table, else English suffix rules
/// (-s, -es, -ies, -ing, -ed) with a minimum stem of three letters, iterated
/// to a fixed point so that lemmatize is idempotent.
std::string lemmatize(std::string_view token);

/// tokenize -> lemmatize -> filter, then every 1-gram followed by every
/// adjacent 2-gram of the filtered sequence ("w1 w2").
std::vector<std::string> preprocess(std::string_view text, const TermFilter& filter,
                                    bool bigrams = true);
std::vector<std::string> preprocess(const RawDocument& raw, const TermSet& stopwords);

/// Lowercase tokens capitalized in more than `threshold` of their occurrences,
/// ignoring sentence- and line-initial positions and ALL-CAPS spellings.
TermSet detect_proper_nouns(std::span<const RawDocument> documents, double threshold);

std::size_t count_characters(std::string_view utf8);
/// Number of 1-gram terms in a term sequence.
std::size_t unigram_count(std::span<const std::string> terms);

std::vector<CityRecord> parse_labels(std::string_view csv_text,
                                     const std::string& source = "labels");
std::vector<CityRecord> load_labels(const std::string& path);

/// Assembles a corpus from per-file documents. Documents of one city are
/// concatenated in the order given, with a sequence break between files.
Corpus build_corpus(std::span<const RawDocument> documents,
                    std::span<const CityRecord> labels,
                    const PreprocessOptions& options);

/// Reads `<city_id>[__suffix].txt` files from doc_dir, in lexicographic
/// filename order per city.
Corpus load_corpus(const std::string& doc_dir, const std::string& labels_path,
                   const PreprocessOptions& options);

std::vector<RawDocument> read_documents(const std::string& doc_dir);

nlohmann::json to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);
nlohmann::json exclusion_report(const Corpus& corpus);

}  // namespace planlens::corpus
