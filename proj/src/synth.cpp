#include "planlens/synth.hpp"

#include <cmath>
#include <filesystem>

#include "planlens/common.hpp"
#include "planlens/csv.hpp"
#include "planlens/topics.hpp"

namespace planlens::synth {

const std::vector<std::string>& noise_words() {
  static const std::vector<std::string> words = {
      "apple",  "piano",  "guitar", "pencil", "violin", "candle", "blanket", "pillow",
      "mirror", "ladder", "basket", "button", "camera", "carpet", "cookie",  "jacket",
      "kettle", "lemon",  "marble", "napkin", "orange", "puzzle", "ribbon",  "saddle",
      "tomato", "velvet", "walnut", "yellow", "zipper", "banner", "pepper",  "trumpet",
      "anchor", "bucket", "cactus", "dolphin", "feather", "giraffe", "hammer", "igloo",
      "jigsaw", "koala", "lantern", "mitten", "nugget",
  };
  return words;
}

bool ecology_topic(std::size_t t) {
  const std::string& name = topics::topic_names().at(t);
  return name == "pollution/waste" || name == "land use" || name == "climate impacts" ||
         name == "offsets";
}

namespace {

std::vector<std::vector<std::string>> lexicon_unigrams() {
  const auto& lex = topics::default_lexicon();
  std::vector<std::vector<std::string>> out(topics::kTopicCount);
  for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
    for (const auto& term : lex.terms[t]) {
      if (term.find(' ') == std::string::npos) out[t].push_back(term);
    }
  }
  return out;
}

std::string city_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "city%03zu", i + 1);
  return buf;
}

}  // namespace

PlantedCorpus planted_corpus(const PlantedCorpusSpec& spec) {
  if (spec.noise_vocab == 0 || spec.noise_vocab > noise_words().size()) {
    throw InputError("noise_vocab must be in [1, " + std::to_string(noise_words().size()) + "]");
  }
  if (spec.min_tokens == 0 || spec.max_tokens < spec.min_tokens) {
    throw InputError("token range is empty");
  }
  Rng rng(spec.seed);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(spec.positive_share * static_cast<double>(spec.n_docs)));
  std::vector<int> labels(spec.n_docs, 0);
  for (std::size_t i = 0; i < n_pos && i < spec.n_docs; ++i) labels[i] = 1;
  rng.shuffle(std::span<int>(labels));

  const auto topic_terms = spec.topic_words ? lexicon_unigrams()
                                            : std::vector<std::vector<std::string>>{};
  PlantedCorpus out;
  for (std::size_t d = 0; d < spec.n_docs; ++d) {
    const std::size_t len =
        spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
    std::vector<std::string> words;
    words.reserve(len + 16);
    for (std::size_t k = 0; k < len; ++k) words.push_back(noise_words()[rng.below(spec.noise_vocab)]);

    const double p = labels[d] ? spec.p_positive : spec.p_negative;
    for (const auto& term : spec.planted) {
      if (!rng.bernoulli(p)) continue;
      const std::size_t copies = 1 + rng.below(3);
      for (std::size_t c = 0; c < copies; ++c) {
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)),
                     term);
      }
    }

    if (spec.topic_words) {
      const double eco = rng.normal();
      const double infra = rng.normal();
      std::vector<double> weight(topics::kTopicCount);
      double total = 0.0;
      for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
        weight[t] = std::exp(0.9 * (ecology_topic(t) ? eco : infra) + 0.3 * rng.normal());
        total += weight[t];
      }
      const std::size_t draws = spec.topic_words / 2 + rng.below(spec.topic_words + 1);
      for (std::size_t k = 0; k < draws; ++k) {
        double u = rng.uniform() * total;
        std::size_t t = 0;
        while (t + 1 < topics::kTopicCount && u >= weight[t]) u -= weight[t++];
        const auto& pool = topic_terms[t];
        if (pool.empty()) continue;
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)),
                     pool[rng.below(pool.size())]);
      }
    }

    std::string text;
    std::size_t until_stop = 8 + rng.below(8);
    for (std::size_t k = 0; k < words.size(); ++k) {
      text += words[k];
      if (--until_stop == 0 || k + 1 == words.size()) {
        text += ".\n";
        until_stop = 8 + rng.below(8);
      } else {
        text += ' ';
      }
    }

    corpus::CityRecord rec;
    rec.city_id = city_name(d);
    rec.label = labels[d];
    if (rng.uniform() >= 0.1) rec.population = std::round(std::exp(11.0 + 1.2 * rng.normal()));
    if (rng.uniform() >= 0.1) rec.baseline_year = 1990.0 + static_cast<double>(rng.below(21));
    if (rng.uniform() >= 0.1) rec.percent_reduction = 20.0 + static_cast<double>(rng.below(81));
    if (rng.uniform() >= 0.1) {
      rec.emis_per_capita = std::round((2.0 + 10.0 * rng.uniform()) * 100.0) / 100.0;
    }
    out.documents.push_back({rec.city_id, std::move(text), rec.city_id + ".txt"});
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::string labels_csv(const std::vector<corpus::CityRecord>& records) {
  std::string out = "city_id,label,population,baseline_year,percent_reduction,emis_per_capita\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : ""; };
  for (const auto& r : records) {
    out += csv::join({r.city_id, std::to_string(r.label), cell(r.population),
                      cell(r.baseline_year), cell(r.percent_reduction),
                      cell(r.emis_per_capita)});
  }
  return out;
}

std::string write_corpus(const PlantedCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& doc : corpus.documents) {
    write_file((std::filesystem::path(dir) / (doc.city_id + ".txt")).string(), doc.text);
  }
  return labels_csv(corpus.records);
}

Eigen::MatrixXd two_block_topic_data(std::size_t n, std::uint64_t seed, double r) {
  if (r <= 0.0 || r >= 1.0) throw InputError("block correlation must be in (0, 1)");
  Rng rng(seed);
  const double a = std::sqrt(r);
  const double b = std::sqrt(1.0 - r);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(topics::kTopicCount));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eco = rng.normal();
    const double infra = rng.normal();
    for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
      x(i, static_cast<Eigen::Index>(t)) = a * (ecology_topic(t) ? eco : infra) + b * rng.normal();
    }
  }
  return x;
}

Eigen::MatrixXd two_block_correlation(double r) {
  const auto p = static_cast<Eigen::Index>(topics::kTopicCount);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i != j && ecology_topic(i) == ecology_topic(j)) m(i, j) = r;
    }
  }
  return m;
}

}  // namespace planlens::synth
