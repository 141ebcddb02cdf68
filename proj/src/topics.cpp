#include "planlens/topics.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <unordered_set>

#include "planlens/common.hpp"
#include "planlens/corpus.hpp"
#include "planlens/csv.hpp"
#include "planlens/resources.hpp"

namespace planlens::topics {

const std::array<std::string, kTopicCount>& topic_names() {
  static const std::array<std::string, kTopicCount> names = {
      "land use", "offsets",  "transportation",  "heating", "energy",
      "pollution/waste", "building", "climate impacts", "industry"};
  return names;
}

const std::array<std::string, kTopicCount>& topic_keys() {
  static const std::array<std::string, kTopicCount> keys = {
      "land_use",        "offsets",  "transportation",  "heating", "energy",
      "pollution_waste", "building", "climate_impacts", "industry"};
  return keys;
}

std::optional<std::size_t> topic_index(std::string_view name) {
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    if (name == topic_names()[t] || name == topic_keys()[t]) return t;
  }
  return std::nullopt;
}

std::optional<std::size_t> Lexicon::find(const std::string& term) const {
  auto it = topic_of.find(term);
  if (it == topic_of.end()) return std::nullopt;
  return it->second;
}

std::string normalize_term(std::string_view raw) {
  std::string out;
  for (const auto& token : corpus::tokenize(raw)) {
    if (!out.empty()) out.push_back(' ');
    out += corpus::lemmatize(token);
  }
  return out;
}

Lexicon parse_lexicon(std::string_view csv_text, const std::string& source) {
  const csv::Table table = csv::parse(csv_text, /*skip_comments=*/true);
  const int topic_col = table.column("topic");
  const int term_col = table.column("term");
  if (topic_col < 0 || term_col < 0) {
    throw InputError(source + ": header must contain topic and term columns");
  }
  Lexicon lex;
  const auto& stopwords = corpus::default_stopwords();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = source + ":" + std::to_string(table.lines[r]);
    const std::string topic = static_cast<std::size_t>(topic_col) < row.size() ? row[topic_col] : "";
    const std::string raw = static_cast<std::size_t>(term_col) < row.size() ? row[term_col] : "";
    const auto t = topic_index(topic);
    if (!t) throw InputError(where + ": unknown topic '" + topic + "'");
    const std::string term = normalize_term(raw);
    if (term.empty()) throw InputError(where + ": empty term for topic '" + topic + "'");
    const auto words = std::count(term.begin(), term.end(), ' ') + 1;
    if (words > 2) {
      throw InputError(where + ": term '" + raw + "' has more than two words");
    }
    auto [it, inserted] = lex.topic_of.emplace(term, *t);
    if (!inserted && it->second != *t) {
      throw InputError(where + ": duplicate term '" + term + "' in topics '" +
                       topic_names()[it->second] + "' and '" + topic_names()[*t] + "'");
    }
    lex.terms[*t].insert(term);
    std::istringstream split(term);
    for (std::string w; split >> w;) {
      if (stopwords.contains(w)) {
        lex.warnings.push_back(where + ": term '" + term + "' contains stopword '" + w +
                               "' and cannot match preprocessed text");
      }
    }
  }
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    if (lex.terms[t].empty()) {
      throw InputError(source + ": topic '" + topic_names()[t] +
                       "' has no terms; a lexicon needs all nine topics");
    }
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) { return parse_lexicon(read_file(path), path); }

const Lexicon& default_lexicon() {
  static const Lexicon lex = parse_lexicon(resources::lexicon_en(), "bundled lexicon");
  return lex;
}

// ---- embeddings -------------------------------------------------------------

const double* EmbeddingTable::find(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? nullptr : values.data() + it->second * dim;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const std::string buf(s);
  errno = 0;
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end != buf.c_str() && *end == '\0' && errno != ERANGE && std::isfinite(out);
}

bool is_count(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

EmbeddingTable parse_word_vectors(std::string_view text, const std::string& source) {
  EmbeddingTable emb;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool first = true;
  std::size_t declared = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (first) {
      first = false;
      if (fields.size() == 2 && is_count(fields[0]) && is_count(fields[1])) {
        declared = std::stoul(std::string(fields[0]));
        emb.dim = std::stoul(std::string(fields[1]));
        if (emb.dim == 0) throw InputError(where + ": header declares dimension 0");
        continue;
      }
    }
    if (fields.size() < 2) throw InputError(where + ": expected a token and a vector");
    const std::size_t got = fields.size() - 1;
    if (emb.dim == 0) emb.dim = got;
    if (got != emb.dim) {
      throw InputError(where + ": expected " + std::to_string(emb.dim) + " values, found " +
                       std::to_string(got));
    }
    std::vector<double> v(got);
    for (std::size_t k = 0; k < got; ++k) {
      if (!parse_double(fields[k + 1], v[k])) {
        throw InputError(where + ": non-numeric value '" + std::string(fields[k + 1]) + "'");
      }
    }
    std::string token(fields[0]);
    if (emb.index.contains(token)) {
      emb.warnings.push_back(where + ": duplicate token '" + token + "' ignored");
      continue;
    }
    emb.index.emplace(token, emb.tokens.size());
    emb.tokens.push_back(std::move(token));
    emb.values.insert(emb.values.end(), v.begin(), v.end());
  }
  if (declared != 0 && declared != emb.tokens.size()) {
    emb.warnings.push_back(source + ": header declares " + std::to_string(declared) +
                           " vectors, file has " + std::to_string(emb.tokens.size()));
  }
  return emb;
}

EmbeddingTable load_word_vectors(const std::string& path) {
  return parse_word_vectors(read_file(path), path);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("cosine similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) throw InputError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Expansion expand_seeds(std::span<const std::string> seeds, const EmbeddingTable& emb,
                       std::size_t k, double min_sim) {
  Expansion out;
  std::vector<std::size_t> seed_rows;
  std::unordered_set<std::string> seed_set(seeds.begin(), seeds.end());
  for (const auto& s : seeds) {
    auto it = emb.index.find(s);
    if (it == emb.index.end()) {
      out.missing_seeds.push_back(s);
    } else {
      seed_rows.push_back(it->second);
    }
  }
  if (seed_rows.empty()) {
    std::string list;
    for (const auto& s : out.missing_seeds) list += (list.empty() ? "" : ", ") + s;
    throw InputError("no seed term found in the embedding table: " + list);
  }
  if (k == 0) return out;

  for (std::size_t row = 0; row < emb.size(); ++row) {
    const std::string& token = emb.tokens[row];
    if (seed_set.contains(token)) continue;
    double best = -2.0;
    std::size_t best_seed = 0;
    for (std::size_t s : seed_rows) {
      const double sim = cosine_similarity(emb.vector(row), emb.vector(s));
      if (sim > best) {
        best = sim;
        best_seed = s;
      }
    }
    if (best >= min_sim) out.candidates.push_back({token, best, emb.tokens[best_seed]});
  }
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.score != b.score ? a.score > b.score : a.term < b.term;
            });
  if (out.candidates.size() > k) out.candidates.resize(k);
  return out;
}

// ---- counting ---------------------------------------------------------------

std::string to_string(CountMode mode) {
  return mode == CountMode::occurrences ? "occurrences" : "distinct";
}

CountMode parse_count_mode(const std::string& s) {
  if (s == "occurrences") return CountMode::occurrences;
  if (s == "distinct") return CountMode::distinct;
  throw InputError("unknown count mode: " + s + " (expected occurrences or distinct)");
}

TopicVector topic_counts(std::span<const std::string> terms, const Lexicon& lexicon,
                         CountMode mode, std::string city_id) {
  TopicVector v;
  v.city_id = std::move(city_id);
  std::unordered_set<std::string_view> seen;
  for (const auto& term : terms) {
    const auto t = lexicon.find(term);
    if (!t) continue;
    if (mode == CountMode::distinct && !seen.insert(term).second) continue;
    ++v.counts[*t];
  }
  return v;
}

std::array<double, kTopicCount> median_topic_counts(std::span<const TopicVector> vectors) {
  if (vectors.empty()) throw InputError("median of an empty list of topic vectors");
  std::array<double, kTopicCount> out{};
  std::vector<std::size_t> column(vectors.size());
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i].counts[t];
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    out[t] = n % 2 ? static_cast<double>(column[n / 2])
                   : 0.5 * static_cast<double>(column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

std::vector<CloudEntry> wordcloud_data(const std::string& city_id,
                                       const featurizer::SparseMatrix& tfidf,
                                       const featurizer::Vocabulary& vocab,
                                       const Lexicon& lexicon, std::size_t top_n) {
  const auto it = std::find(tfidf.row_ids.begin(), tfidf.row_ids.end(), city_id);
  if (it == tfidf.row_ids.end()) throw InputError("unknown city: " + city_id);
  const auto row = static_cast<std::size_t>(it - tfidf.row_ids.begin());
  const auto cols = tfidf.row_cols(row);
  const auto vals = tfidf.row_values(row);
  std::vector<CloudEntry> entries;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (vals[k] == 0.0) continue;
    const std::string& term = vocab.terms.at(cols[k]);
    entries.push_back({term, vals[k], lexicon.find(term)});
  }
  std::sort(entries.begin(), entries.end(), [](const CloudEntry& a, const CloudEntry& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  if (entries.size() > top_n) entries.resize(top_n);
  return entries;
}

// ---- persistence ------------------------------------------------------------

std::string lexicon_csv(const Lexicon& lexicon) {
  std::string out = "topic,term\n";
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    for (const auto& term : lexicon.terms[t]) out += csv::join({topic_names()[t], term});
  }
  return out;
}

namespace {

std::string topic_header() {
  std::string h = "city_id";
  for (const auto& k : topic_keys()) h += "," + k;
  return h + "\n";
}

}  // namespace

std::string topic_vectors_csv(std::span<const TopicVector> vectors) {
  std::string out = topic_header();
  for (const auto& v : vectors) {
    csv::Row row{v.city_id};
    for (std::size_t c : v.counts) row.push_back(std::to_string(c));
    out += csv::join(row);
  }
  return out;
}

std::string normalized_topic_vectors_csv(std::span<const TopicVector> vectors,
                                         std::span<const std::size_t> term_counts) {
  if (vectors.size() != term_counts.size()) {
    throw InternalError("normalized topic vectors: length mismatch");
  }
  std::string out = topic_header();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    csv::Row row{vectors[i].city_id};
    for (std::size_t c : vectors[i].counts) {
      const double v = term_counts[i] ? static_cast<double>(c) / static_cast<double>(term_counts[i])
                                      : 0.0;
      row.push_back(format_number(v));
    }
    out += csv::join(row);
  }
  return out;
}

std::string median_csv(const std::array<double, kTopicCount>& medians) {
  std::string out = "topic,median_count\n";
  for (std::size_t t = 0; t < kTopicCount; ++t) {
    out += csv::join({topic_keys()[t], format_number(medians[t])});
  }
  return out;
}

nlohmann::json wordcloud_json(const std::string& city_id, std::span<const CloudEntry> entries) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& e : entries) {
    words.push_back({{"term", e.term},
                     {"score", round12(e.score)},
                     {"topic", e.topic ? nlohmann::json(topic_names()[*e.topic])
                                       : nlohmann::json(nullptr)}});
  }
  return {{"city_id", city_id}, {"words", words}};
}

std::string candidates_csv(std::string_view topic, std::span<const Candidate> candidates,
                           bool header) {
  std::string out = header ? "topic,term,score,nearest_seed\n" : "";
  for (const auto& c : candidates) {
    out += csv::join({std::string(topic), c.term, format_number(c.score), c.nearest_seed});
  }
  return out;
}

}  // namespace planlens::topics
