#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "planlens/corpus.hpp"

namespace planlens::synth {

struct PlantedCorpusSpec {
  std::uint64_t seed = 7;
  std::size_t n_docs = 200;
  double positive_share = 0.7;
  std::vector<std::string> planted{"mayor", "neutrality", "citizen", "baseline", "pathway"};
  /// Probability that a planted term appears in a positive / negative document.
  double p_positive = 0.8;
  double p_negative = 0.03;
  std::size_t noise_vocab = 45;
  std::size_t min_tokens = 20;
  std::size_t max_tokens = 40;
  /// Mean number of lexicon words per document, drawn from two latent
  /// factors; the count varies uniformly from half to 1.5 times this. 0 disables.
  std::size_t topic_words = 0;
};

struct PlantedCorpus {
  std::vector<corpus::RawDocument> documents;
  std::vector<corpus::CityRecord> records;
};

/// Documents of random noise words with planted predictive terms. Positive
/// documents contain each planted term with probability p_positive,
/// negatives with p_negative. Records carry synthetic metadata.
PlantedCorpus planted_corpus(const PlantedCorpusSpec& spec);

/// Noise words used by planted_corpus: lemma-stable, not stopwords, and
/// outside the bundled lexicon.
const std::vector<std::string>& noise_words();

/// Writes `<city>.txt` files into dir and returns the labels CSV text.
std::string write_corpus(const PlantedCorpus& corpus, const std::string& dir);
std::string labels_csv(const std::vector<corpus::CityRecord>& records);

/// n x 9 matrix in topic order: pollution/waste, land use, climate impacts and
/// offsets load on one latent factor, the other five on a second, each with
/// within-block correlation `r` and no cross-block correlation.
Eigen::MatrixXd two_block_topic_data(std::size_t n, std::uint64_t seed, double r = 0.9);

/// The exact population correlation matrix of two_block_topic_data.
Eigen::MatrixXd two_block_correlation(double r = 0.9);

/// True when topic index t belongs to the Ecology block.
bool ecology_topic(std::size_t t);

}  // namespace planlens::synth
