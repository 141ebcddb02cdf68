#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "planlens/eval.hpp"
#include "planlens/factors.hpp"
#include "planlens/featurizer.hpp"
#include "planlens/glm.hpp"
#include "planlens/topics.hpp"

namespace planlens::config {

struct Paths {
  std::string docs;
  std::string labels;
  std::string lexicon;     // empty: bundled lexicon
  std::string stopwords;   // empty: bundled list
  std::string embeddings;  // needed by expand-lexicon only
  std::string out = "out";

  bool operator==(const Paths&) const = default;
};

struct CorpusOptions {
  std::size_t min_chars = 50;
  bool bigrams = true;
  bool remove_proper_nouns = true;
  double proper_noun_threshold = 0.8;

  bool operator==(const CorpusOptions&) const = default;
};

struct FeaturizerOptions {
  double min_df = 0.10;
  featurizer::TfidfMode tfidf_mode = featurizer::TfidfMode::paper;
  featurizer::FrequencyBasis frequency_basis = featurizer::FrequencyBasis::corpus_count;

  bool operator==(const FeaturizerOptions&) const = default;
};

struct GlmOptions {
  glm::WeightMode weight_mode = glm::WeightMode::balanced;
  int max_iters = 10000;
  double tol = 1e-7;
  bool penalize_intercept = false;
  bool standardize = false;
  int grid_points = 30;
  double grid_ratio = 1e-3;

  bool operator==(const GlmOptions&) const = default;
};

struct EvalOptions {
  int n_splits = 50;
  double test_fraction = 0.2;
  eval::LoocvScoring scoring = eval::LoocvScoring::accuracy;
  bool yates = false;

  bool operator==(const EvalOptions&) const = default;
};

struct TopicOptions {
  topics::CountMode count_mode = topics::CountMode::occurrences;
  /// Divide counts by each city's 1-gram count before correlating and factoring.
  bool normalize = false;
  std::size_t wordcloud_terms = 25;
  std::size_t expand_k = 20;
  double expand_min_similarity = 0.5;

  bool operator==(const TopicOptions&) const = default;
};

struct FactorSettings {
  factors::Extraction extraction = factors::Extraction::principal_axis;
  factors::Rotation rotation = factors::Rotation::varimax;
  int max_iters = 200;
  double tol = 1e-6;

  bool operator==(const FactorSettings&) const = default;
};

struct RunConfig {
  Paths paths;
  CorpusOptions corpus;
  FeaturizerOptions featurizer;
  GlmOptions glm;
  EvalOptions eval;
  TopicOptions topics;
  FactorSettings factors;
  std::uint64_t seed = 0;
  int threads = 1;

  bool operator==(const RunConfig&) const = default;

  glm::FitConfig fit_config() const;
  eval::EvalOptions eval_options() const;
  factors::FactorOptions factor_options() const;
};

/// INI text with sections paths, corpus, featurizer, glm, eval, topics,
/// factors and run. Unknown sections or keys are errors. Relative paths are
/// resolved against base_dir when it is nonempty.
RunConfig parse_config(std::string_view text, const std::string& base_dir = {},
                       const std::string& source = "config");
RunConfig load_config(const std::string& path);
/// Writes every field; parse_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& config);

/// Range checks on every field.
void validate(const RunConfig& config);

/// Effective configuration for manifests. `threads` is left out, since it
/// may not change any output.
nlohmann::json to_json(const RunConfig& config);

}  // namespace planlens::config
