// Regenerates the bundled mini-corpus under data/mini.
// Usage: make_mini_corpus <out_dir>
#include <cstdio>
#include <filesystem>

#include "planlens/common.hpp"
#include "planlens/synth.hpp"
#include "planlens/topics.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out_dir>\n", argv[0]);
    return 2;
  }
  using namespace planlens;
  const std::filesystem::path out = argv[1];
  synth::PlantedCorpusSpec spec;
  spec.seed = 11;
  spec.n_docs = 40;
  spec.topic_words = 12;
  auto corpus = synth::planted_corpus(spec);

  // One plan too short to keep.
  corpus::CityRecord stub;
  stub.city_id = "city041";
  stub.label = 0;
  corpus.documents.push_back({stub.city_id, "Draft plan pending.\n", stub.city_id + ".txt"});
  corpus.records.push_back(stub);

  std::filesystem::remove_all(out / "docs");
  write_file((out / "labels.csv").string(), synth::write_corpus(corpus, (out / "docs").string()));

  // Word vectors: three seeds per topic near that topic's axis, two made-up
  // neighbors per topic, and the noise words spread at random.
  Rng rng(spec.seed);
  const std::size_t dim = topics::kTopicCount;
  std::string vectors;
  std::size_t rows = 0;
  auto add = [&](const std::string& token, std::size_t axis, double spread) {
    vectors += token;
    for (std::size_t d = 0; d < dim; ++d) {
      const double base = d == axis ? 1.0 : 0.0;
      vectors += " " + format_number(round12(base + spread * rng.normal()));
    }
    vectors += "\n";
    ++rows;
  };
  const auto& lexicon = topics::default_lexicon();
  for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
    std::size_t seeds = 0;
    for (const auto& term : lexicon.terms[t]) {
      if (term.find(' ') != std::string::npos) continue;
      add(term, t, 0.1);
      if (++seeds == 3) break;
    }
    add(topics::topic_keys()[t] + "_near1", t, 0.15);
    add(topics::topic_keys()[t] + "_near2", t, 0.3);
  }
  for (const auto& w : synth::noise_words()) add(w, rng.below(dim), 2.0);
  write_file((out / "vectors.txt").string(),
             std::to_string(rows) + " " + std::to_string(dim) + "\n" + vectors);
  std::fprintf(stderr, "%zu documents, %zu vectors\n", corpus.documents.size(), rows);
  return 0;
}
