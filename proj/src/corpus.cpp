#include "planlens/corpus.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <unordered_map>

#include "planlens/common.hpp"
#include "planlens/csv.hpp"
#include "planlens/resources.hpp"

namespace planlens::corpus {
namespace {

namespace fs = std::filesystem;

// ---- UTF-8 letters -------------------------------------------------------

// Decodes the code point at text[i]; malformed bytes decode as U+FFFD, width 1.
char32_t decode(std::string_view text, std::size_t i, std::size_t& width) {
  const auto c = static_cast<unsigned char>(text[i]);
  std::size_t extra = 0;
  char32_t cp = 0;
  if (c < 0x80) {
    width = 1;
    return c;
  } else if ((c & 0xE0) == 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    width = 1;
    return 0xFFFD;
  }
  if (i + extra >= text.size()) {
    width = 1;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k <= extra; ++k) {
    const auto cc = static_cast<unsigned char>(text[i + k]);
    if ((cc & 0xC0) != 0x80) {
      width = 1;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  width = extra + 1;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// ASCII, Latin-1 Supplement and Latin Extended-A letters.
bool is_letter(char32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
  return cp >= 0x100 && cp <= 0x17F;
}

bool is_upper(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return true;
  if (cp >= 0xC0 && cp <= 0xDE) return cp != 0xD7;
  if (cp >= 0x100 && cp <= 0x137) return cp % 2 == 0;
  if (cp >= 0x139 && cp <= 0x148) return cp % 2 == 1;
  if (cp >= 0x14A && cp <= 0x177) return cp % 2 == 0;
  if (cp == 0x178) return true;
  if (cp >= 0x179 && cp <= 0x17E) return cp % 2 == 1;
  return false;
}

char32_t to_lower(char32_t cp) {
  if (!is_upper(cp)) return cp;
  if (cp < 0x100) return cp + 0x20;
  if (cp == 0x178) return 0xFF;
  return cp + 1;
}

struct TokenInfo {
  std::string lower;
  bool initial = false;   // sentence or line initial
  bool titlecase = false;
  bool allcaps = false;
};

template <typename Fn>
void scan_tokens(std::string_view text, Fn&& emit) {
  std::size_t i = 0;
  bool boundary = true;
  while (i < text.size()) {
    std::size_t width = 0;
    char32_t cp = decode(text, i, width);
    if (!is_letter(cp)) {
      if (cp == '.' || cp == '!' || cp == '?' || cp == ':' || cp == ';' ||
          cp == '\n') {
        boundary = true;
      }
      i += width;
      continue;
    }
    TokenInfo tok;
    tok.initial = boundary;
    std::size_t letters = 0;
    std::size_t uppers = 0;
    bool first_upper = false;
    while (i < text.size()) {
      cp = decode(text, i, width);
      if (!is_letter(cp)) break;
      const bool up = is_upper(cp);
      if (letters == 0) first_upper = up;
      uppers += up ? 1 : 0;
      ++letters;
      encode(to_lower(cp), tok.lower);
      i += width;
    }
    boundary = false;
    if (letters < 2) continue;
    tok.allcaps = uppers == letters;
    tok.titlecase = first_upper && uppers == 1;
    emit(std::move(tok));
  }
}

// ---- lemmatizer -----------------------------------------------------------

struct LemmaTable {
  std::unordered_map<std::string, std::string> forms;
  std::unordered_set<std::string> roots;
};

const LemmaTable& lemma_table() {
  static const LemmaTable table = [] {
    LemmaTable t;
    const std::string_view data = resources::lemmas_en();
    std::size_t pos = 0;
    while (pos < data.size()) {
      std::size_t end = data.find('\n', pos);
      if (end == std::string_view::npos) end = data.size();
      std::string_view line = data.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty() || line.front() == '#') continue;
      const std::size_t tab = line.find('\t');
      if (tab == std::string_view::npos) {
        throw InternalError("malformed lemma table line: " + std::string(line));
      }
      std::string form(line.substr(0, tab));
      std::string lemma(line.substr(tab + 1));
      t.roots.insert(lemma);
      t.forms.emplace(std::move(form), std::move(lemma));
    }
    return t;
  }();
  return table;
}

bool is_vowel_at(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return true;
    case 'y':
      return i > 0 && !is_vowel_at(w, i - 1);
    default:
      return false;
  }
}

bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel_at(w, i)) return true;
  }
  return false;
}

// Number of vowel-consonant sequences.
int measure(std::string_view w) {
  int m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool v = is_vowel_at(w, i);
    if (prev_vowel && !v) ++m;
    prev_vowel = v;
  }
  return m;
}

bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  const char last = w[n - 1];
  return !is_vowel_at(w, n - 3) && is_vowel_at(w, n - 2) && !is_vowel_at(w, n - 1) &&
         last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

constexpr std::size_t kMinStem = 3;

// Restores the stem left after removing -ing or -ed.
std::string restore_stem(std::string stem) {
  const std::size_t n = stem.size();
  const char last = stem[n - 1];
  const bool last_consonant = !is_vowel_at(stem, n - 1);
  if (ends_with(stem, "bl") || ends_with(stem, "iz") ||
      (ends_with(stem, "at") && measure(stem) >= 2)) {
    return stem + "e";
  }
  if (last_consonant && n >= 2 && stem[n - 2] == last && last != 'l' && last != 's' &&
      last != 'z') {
    stem.pop_back();
    return stem;
  }
  if (last == 'c' || last == 'v' || ends_with(stem, "rg") || ends_with(stem, "dg")) {
    return stem + "e";
  }
  if (last == 's' && n >= 2 && is_vowel_at(stem, n - 2)) return stem + "e";
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string apply_suffix_rules(std::string_view w) {
  const std::size_t n = w.size();
  if (ends_with(w, "ies") && n - 3 >= kMinStem) {
    return std::string(w.substr(0, n - 3)) + "y";
  }
  if (ends_with(w, "sses")) return std::string(w.substr(0, n - 2));
  if ((ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "xes")) &&
      n - 2 >= kMinStem) {
    return std::string(w.substr(0, n - 2));
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is") && n - 1 >= kMinStem) {
    return std::string(w.substr(0, n - 1));
  }
  if (ends_with(w, "ing") && n - 3 >= kMinStem && has_vowel(w.substr(0, n - 3))) {
    return restore_stem(std::string(w.substr(0, n - 3)));
  }
  if (ends_with(w, "ed") && !ends_with(w, "eed") && n - 2 >= kMinStem &&
      has_vowel(w.substr(0, n - 2))) {
    return restore_stem(std::string(w.substr(0, n - 2)));
  }
  return std::string(w);
}

std::string lemma_step(const std::string& w) {
  const LemmaTable& table = lemma_table();
  if (auto it = table.forms.find(w); it != table.forms.end()) return it->second;
  if (table.roots.contains(w)) return w;
  return apply_suffix_rules(w);
}

std::optional<double> parse_optional_number(const std::string& cell,
                                            const std::string& column,
                                            const std::string& source,
                                            std::size_t line) {
  if (cell.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw InputError(source + ":" + std::to_string(line) + ": column " + column +
                     " is not a number: '" + cell + "'");
  }
  return v;
}

std::string city_id_from_filename(const std::string& filename) {
  std::string stem = filename.substr(0, filename.size() - 4);  // ".txt"
  const std::size_t sep = stem.find("__");
  if (sep != std::string::npos) stem.resize(sep);
  return stem;
}

}  // namespace

// ---- Corpus accessors -----------------------------------------------------

std::vector<std::string> Corpus::city_ids() const {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.city_id);
  return ids;
}

std::vector<int> Corpus::labels() const {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.label);
  return y;
}

const std::vector<std::string>& Corpus::terms(const std::string& city_id) const {
  auto it = term_sequences.find(city_id);
  if (it == term_sequences.end()) throw InputError("unknown city: " + city_id);
  return it->second;
}

// ---- stopwords ------------------------------------------------------------

TermSet parse_stopwords(std::string_view text) {
  TermSet words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    words.emplace(line);
  }
  return words;
}

const TermSet& default_stopwords() {
  static const TermSet words = parse_stopwords(resources::stopwords_en());
  return words;
}

TermSet load_stopwords(const std::string& path) {
  return parse_stopwords(read_file(path));
}

// ---- tokenize / lemmatize / preprocess ------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  scan_tokens(text, [&](TokenInfo&& t) { tokens.push_back(std::move(t.lower)); });
  return tokens;
}

std::string lemmatize(std::string_view token) {
  std::string current(token);
  for (;;) {
    std::string next = lemma_step(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

std::vector<std::string> preprocess(std::string_view text, const TermFilter& filter,
                                    bool bigrams) {
  std::vector<std::string> unigrams;
  for (std::string& token : tokenize(text)) {
    if (filter.proper_nouns && filter.proper_nouns->contains(token)) continue;
    std::string lemma = lemmatize(token);
    if (filter.stopwords &&
        (filter.stopwords->contains(token) || filter.stopwords->contains(lemma))) {
      continue;
    }
    unigrams.push_back(std::move(lemma));
  }
  std::vector<std::string> terms = unigrams;
  if (bigrams && unigrams.size() >= 2) {
    terms.reserve(2 * unigrams.size() - 1);
    for (std::size_t i = 0; i + 1 < unigrams.size(); ++i) {
      terms.push_back(unigrams[i] + " " + unigrams[i + 1]);
    }
  }
  return terms;
}

std::vector<std::string> preprocess(const RawDocument& raw, const TermSet& stopwords) {
  return preprocess(raw.text, TermFilter{&stopwords, nullptr});
}

TermSet detect_proper_nouns(std::span<const RawDocument> documents, double threshold) {
  struct Tally {
    std::size_t total = 0;
    std::size_t capitalized = 0;
  };
  std::unordered_map<std::string, Tally> tallies;
  for (const auto& doc : documents) {
    scan_tokens(doc.text, [&](TokenInfo&& t) {
      if (t.initial || t.allcaps) return;
      Tally& tally = tallies[t.lower];
      ++tally.total;
      if (t.titlecase) ++tally.capitalized;
    });
  }
  TermSet proper;
  for (const auto& [token, tally] : tallies) {
    if (tally.total > 0 && static_cast<double>(tally.capitalized) >
                               threshold * static_cast<double>(tally.total)) {
      proper.insert(token);
    }
  }
  return proper;
}

std::size_t count_characters(std::string_view utf8) {
  std::size_t n = 0;
  for (char c : utf8) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::size_t unigram_count(std::span<const std::string> terms) {
  return static_cast<std::size_t>(std::count_if(
      terms.begin(), terms.end(),
      [](const std::string& t) { return t.find(' ') == std::string::npos; }));
}

// ---- labels ---------------------------------------------------------------

std::vector<CityRecord> parse_labels(std::string_view csv_text, const std::string& source) {
  const csv::Table table = csv::parse(csv_text);
  const int id_col = table.column("city_id");
  const int label_col = table.column("label");
  if (id_col < 0 || label_col < 0) {
    throw InputError(source + ": header must contain city_id and label columns");
  }
  const int pop_col = table.column("population");
  const int year_col = table.column("baseline_year");
  const int pct_col = table.column("percent_reduction");
  const int emis_col = table.column("emis_per_capita");

  std::vector<CityRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.lines[r];
    auto cell = [&](int col) -> std::string {
      return col >= 0 && static_cast<std::size_t>(col) < row.size() ? row[col] : "";
    };
    const auto where = source + ":" + std::to_string(line);
    CityRecord rec;
    rec.city_id = cell(id_col);
    if (rec.city_id.empty()) throw InputError(where + ": empty city_id");
    if (!seen.insert(rec.city_id).second) {
      throw InputError(where + ": duplicate city_id " + rec.city_id);
    }
    const std::string label = cell(label_col);
    if (label != "0" && label != "1") {
      throw InputError(where + ": label must be 0 or 1, got '" + label + "'");
    }
    rec.label = label == "1" ? 1 : 0;
    rec.population = parse_optional_number(cell(pop_col), "population", source, line);
    rec.baseline_year = parse_optional_number(cell(year_col), "baseline_year", source, line);
    rec.percent_reduction =
        parse_optional_number(cell(pct_col), "percent_reduction", source, line);
    rec.emis_per_capita =
        parse_optional_number(cell(emis_col), "emis_per_capita", source, line);
    if (rec.population && *rec.population < 0) {
      throw InputError(where + ": population must be nonnegative");
    }
    if (rec.baseline_year && (*rec.baseline_year < 1900 || *rec.baseline_year > 2100)) {
      throw InputError(where + ": baseline_year outside [1900, 2100]");
    }
    if (rec.percent_reduction && *rec.percent_reduction < 0) {
      throw InputError(where + ": percent_reduction must be nonnegative");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CityRecord> load_labels(const std::string& path) {
  return parse_labels(read_file(path), path);
}

// ---- corpus assembly ------------------------------------------------------

Corpus build_corpus(std::span<const RawDocument> documents,
                    std::span<const CityRecord> labels,
                    const PreprocessOptions& options) {
  // Group files per city, keeping the given file order.
  std::map<std::string, std::vector<const RawDocument*>> by_city;
  for (const auto& doc : documents) {
    if (doc.city_id.empty()) {
      throw InputError("document with empty city id: " + doc.source_path);
    }
    if (!is_valid_utf8(doc.text)) {
      throw InputError("document is not valid UTF-8: " + doc.source_path);
    }
    by_city[doc.city_id].push_back(&doc);
  }

  std::map<std::string, const CityRecord*> label_of;
  for (const auto& rec : labels) label_of.emplace(rec.city_id, &rec);

  Corpus corpus;
  std::vector<RawDocument> retained_docs;
  std::vector<std::string> retained_ids;
  for (const auto& [city, docs] : by_city) {
    std::size_t chars = 0;
    for (const RawDocument* d : docs) chars += count_characters(d->text);
    if (chars < options.min_chars) {
      corpus.excluded.push_back(
          {city, "text shorter than " + std::to_string(options.min_chars) +
                     " characters (" + std::to_string(chars) + ")"});
      continue;
    }
    auto it = label_of.find(city);
    if (it == label_of.end()) throw InputError("no label for city " + city);
    corpus.records.push_back(*it->second);
    retained_ids.push_back(city);
    for (const RawDocument* d : docs) retained_docs.push_back(*d);
  }

  const TermSet& stopwords =
      options.stopwords.empty() ? default_stopwords() : options.stopwords;
  TermSet proper;
  if (options.remove_proper_nouns) {
    proper = detect_proper_nouns(retained_docs, options.proper_noun_threshold);
    corpus.proper_nouns.assign(proper.begin(), proper.end());
    std::sort(corpus.proper_nouns.begin(), corpus.proper_nouns.end());
  }
  const TermFilter filter{&stopwords, options.remove_proper_nouns ? &proper : nullptr};

  for (const auto& city : retained_ids) {
    std::vector<std::string> sequence;
    for (const RawDocument* d : by_city[city]) {
      auto terms = preprocess(d->text, filter, options.bigrams);
      sequence.insert(sequence.end(), std::make_move_iterator(terms.begin()),
                      std::make_move_iterator(terms.end()));
    }
    corpus.term_sequences.emplace(city, std::move(sequence));
  }
  return corpus;
}

std::vector<RawDocument> read_documents(const std::string& doc_dir) {
  std::error_code ec;
  if (!fs::is_directory(doc_dir, ec)) {
    throw InputError("document directory not found: " + doc_dir);
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(doc_dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 4 && name.ends_with(".txt")) names.push_back(name);
  }
  if (ec) throw InputError("cannot list directory: " + doc_dir);
  if (names.empty()) throw InputError("no .txt documents in " + doc_dir);
  std::sort(names.begin(), names.end());

  std::vector<RawDocument> docs;
  docs.reserve(names.size());
  for (const auto& name : names) {
    const std::string path = (fs::path(doc_dir) / name).string();
    docs.push_back({city_id_from_filename(name), read_file(path), path});
  }
  return docs;
}

Corpus load_corpus(const std::string& doc_dir, const std::string& labels_path,
                   const PreprocessOptions& options) {
  const auto docs = read_documents(doc_dir);
  const auto labels = load_labels(labels_path);
  return build_corpus(docs, labels, options);
}

// ---- serialization ----------------------------------------------------------

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const Corpus& corpus) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : corpus.records) {
    records.push_back({{"city_id", r.city_id},
                       {"label", r.label},
                       {"population", optional_json(r.population)},
                       {"baseline_year", optional_json(r.baseline_year)},
                       {"percent_reduction", optional_json(r.percent_reduction)},
                       {"emis_per_capita", optional_json(r.emis_per_capita)}});
  }
  nlohmann::json sequences = nlohmann::json::object();
  for (const auto& [city, terms] : corpus.term_sequences) sequences[city] = terms;
  return {{"records", records},
          {"term_sequences", sequences},
          {"excluded", exclusion_report(corpus)},
          {"proper_nouns", corpus.proper_nouns}};
}

Corpus corpus_from_json(const nlohmann::json& j) {
  Corpus corpus;
  for (const auto& r : j.at("records")) {
    CityRecord rec;
    rec.city_id = r.at("city_id").get<std::string>();
    rec.label = r.at("label").get<int>();
    rec.population = optional_from(r.at("population"));
    rec.baseline_year = optional_from(r.at("baseline_year"));
    rec.percent_reduction = optional_from(r.at("percent_reduction"));
    rec.emis_per_capita = optional_from(r.at("emis_per_capita"));
    corpus.records.push_back(std::move(rec));
  }
  for (const auto& [city, terms] : j.at("term_sequences").items()) {
    corpus.term_sequences.emplace(city, terms.get<std::vector<std::string>>());
  }
  for (const auto& e : j.at("excluded")) {
    corpus.excluded.push_back(
        {e.at("city_id").get<std::string>(), e.at("reason").get<std::string>()});
  }
  corpus.proper_nouns = j.at("proper_nouns").get<std::vector<std::string>>();
  return corpus;
}

nlohmann::json exclusion_report(const Corpus& corpus) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : corpus.excluded) {
    out.push_back({{"city_id", e.city_id}, {"reason", e.reason}});
  }
  return out;
}

}  // namespace planlens::corpus
