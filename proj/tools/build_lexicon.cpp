// Regenerates data/lexicon_en_v1.csv from the raw key-term transcription.
// Usage: build_lexicon <lexicon_raw.tsv> <out.csv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "planlens/common.hpp"
#include "planlens/corpus.hpp"
#include "planlens/csv.hpp"
#include "planlens/topics.hpp"

namespace {

std::string join_hyphenation(std::string term) {
  for (std::size_t pos; (pos = term.find("- ")) != std::string::npos;) term.erase(pos, 2);
  for (std::size_t pos; (pos = term.find('-')) != std::string::npos;) term.erase(pos, 1);
  return term;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <raw.tsv> <out.csv>\n", argv[0]);
    return 2;
  }
  using namespace planlens;
  const std::string raw = read_file(argv[1]);
  const auto& stopwords = corpus::default_stopwords();

  std::map<std::string, std::size_t> topic_of;
  std::vector<std::vector<std::string>> order(topics::kTopicCount);
  std::vector<std::string> notes;

  std::istringstream in(raw);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string topic = line.substr(0, tab);
    const std::string printed = line.substr(tab + 1);
    const auto t = topics::topic_index(topic);
    if (!t) {
      std::fprintf(stderr, "unknown topic: %s\n", topic.c_str());
      return 2;
    }
    const std::string joined = join_hyphenation(printed);
    const std::string term = topics::normalize_term(joined);
    if (joined != printed) notes.push_back("'" + printed + "' read as '" + joined + "'");
    if (term.empty()) {
      notes.push_back("'" + printed + "' dropped: no letters");
      continue;
    }
    bool has_stopword = false;
    std::istringstream words(term);
    for (std::string w; words >> w;) has_stopword |= stopwords.contains(w);
    if (has_stopword) {
      notes.push_back("'" + printed + "' dropped: contains a stopword");
      continue;
    }
    auto [it, inserted] = topic_of.emplace(term, *t);
    if (!inserted) {
      if (it->second != *t) {
        notes.push_back("'" + term + "' kept in " + topics::topic_names()[it->second] +
                        ", also listed under " + topics::topic_names()[*t]);
      }
      continue;
    }
    order[*t].push_back(term);
  }

  std::string out =
      "# planlens nine-topic lexicon, version 1. Generated by tools/build_lexicon.cpp\n"
      "# from data/lexicon_raw.tsv: hyphenation joined, terms lemmatized,\n"
      "# duplicates merged, a term listed under two topics kept in the first.\n";
  for (const auto& n : notes) out += "# " + n + "\n";
  out += "topic,term\n";
  for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
    for (const auto& term : order[t]) out += csv::join({topics::topic_names()[t], term});
  }
  write_file(argv[2], out);
  std::fprintf(stderr, "%zu terms, %zu notes\n", topic_of.size(), notes.size());
  return 0;
}
