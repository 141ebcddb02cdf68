#include "planlens/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "planlens/common.hpp"
#include "planlens/config.hpp"
#include "planlens/corpus.hpp"
#include "planlens/csv.hpp"
#include "planlens/eval.hpp"
#include "planlens/factors.hpp"
#include "planlens/featurizer.hpp"
#include "planlens/resources.hpp"
#include "planlens/topics.hpp"

namespace planlens::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Context {
  config::RunConfig cfg;
  bool svg = false;
  std::optional<std::string> expand_topic;
  std::ostream* log = nullptr;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw InputError(what + " path is not set in the configuration");
  if (!fs::exists(path)) throw InputError(what + " not found: " + path);
}

// Collects the inputs and outputs of one stage and writes its manifest.
class Stage {
 public:
  Stage(const Context& ctx, std::string name)
      : ctx_(ctx), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const std::string& path) {
    inputs_.push_back({{"role", role}, {"path", path}, {"sha256", sha256_hex(read_file(path))}});
  }
  void input_bytes(const std::string& role, const std::string& label, std::string_view bytes) {
    inputs_.push_back({{"role", role}, {"path", label}, {"sha256", sha256_hex(bytes)}});
  }

  /// Writes `contents` to `<out>/<relative>` and records it.
  void output(const std::string& relative, std::string_view contents) {
    const fs::path path = fs::path(ctx_.cfg.paths.out) / relative;
    fs::create_directories(path.parent_path());
    write_file(path.string(), contents);
    outputs_.push_back({{"path", relative}, {"sha256", sha256_hex(contents)}});
  }

  void flag(const std::string& key, json value) { flags_[key] = std::move(value); }

  void finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json manifest = {
        {"tool", "planlens"},
        {"version", std::string(kVersion)},
        {"stage", name_},
        {"config", config::to_json(ctx_.cfg)},
        {"inputs", inputs_},
        {"outputs", outputs_},
        {"design", design_flags()},
        {"flags", flags_},
        {"runtime", {{"seconds", seconds}, {"threads", ctx_.cfg.threads}}},
    };
    const fs::path path = fs::path(ctx_.cfg.paths.out) / name_ / "manifest.json";
    fs::create_directories(path.parent_path());
    write_file(path.string(), manifest.dump(2) + "\n");
    *ctx_.log << name_ << ": " << outputs_.size() << " file(s) written\n";
  }

 private:
  json design_flags() const {
    const auto& c = ctx_.cfg;
    return {
        {"tfidf_mode", featurizer::to_string(c.featurizer.tfidf_mode)},
        {"frequency_basis", featurizer::to_string(c.featurizer.frequency_basis)},
        {"min_df_rule", "document count >= ceil(min_df * n_docs)"},
        {"weight_mode", glm::to_string(c.glm.weight_mode)},
        {"penalize_intercept", c.glm.penalize_intercept},
        {"lambda_grid", "log-spaced from lambda_max, per training set"},
        {"loocv_scoring", eval::to_string(c.eval.scoring)},
        {"loocv_fold_weights", "class weights of the training partition"},
        {"lambda_tie_rule", "larger lambda"},
        {"chi_square_yates", c.eval.yates},
        {"count_mode", topics::to_string(c.topics.count_mode)},
        {"bigram_matches_consume_unigrams", false},
        {"topic_normalization", c.topics.normalize},
        {"factor_extraction", factors::to_string(c.factors.extraction)},
        {"factor_rotation", factors::to_string(c.factors.rotation)},
        {"factor_scores", "regression method"},
        {"quadrant_zero_rule", "a zero score counts as negative"},
        {"number_format", "12 significant digits"},
    };
  }

  const Context& ctx_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json flags_ = json::object();
};

corpus::PreprocessOptions preprocess_options(const config::RunConfig& cfg) {
  corpus::PreprocessOptions o;
  if (!cfg.paths.stopwords.empty()) o.stopwords = corpus::load_stopwords(cfg.paths.stopwords);
  o.remove_proper_nouns = cfg.corpus.remove_proper_nouns;
  o.proper_noun_threshold = cfg.corpus.proper_noun_threshold;
  o.bigrams = cfg.corpus.bigrams;
  o.min_chars = cfg.corpus.min_chars;
  return o;
}

struct CorpusInputs {
  std::vector<corpus::RawDocument> documents;
  std::string labels_text;
  std::string stopwords_text;
  std::string digest;
  std::string cache_relative;
};

// Reads the raw inputs and derives the content address of their corpus.
CorpusInputs read_corpus_inputs(const config::RunConfig& cfg) {
  require_file(cfg.paths.docs, "document directory");
  require_file(cfg.paths.labels, "labels file");
  CorpusInputs in;
  in.documents = corpus::read_documents(cfg.paths.docs);
  in.labels_text = read_file(cfg.paths.labels);
  in.stopwords_text = cfg.paths.stopwords.empty() ? std::string(resources::stopwords_en())
                                                  : read_file(cfg.paths.stopwords);
  json key = {
      {"labels", sha256_hex(in.labels_text)},
      {"stopwords", sha256_hex(in.stopwords_text)},
      {"lemmas", sha256_hex(resources::lemmas_en())},
      {"corpus", config::to_json(cfg)["corpus"]},
      {"version", std::string(kVersion)},
  };
  json docs = json::array();
  for (const auto& d : in.documents) {
    docs.push_back({fs::path(d.source_path).filename().string(), sha256_hex(d.text)});
  }
  key["documents"] = docs;
  in.digest = sha256_hex(key.dump());
  in.cache_relative = "cache/corpus-" + in.digest.substr(0, 16) + ".json";
  return in;
}

void record_corpus_inputs(Stage& stage, const config::RunConfig& cfg, const CorpusInputs& in) {
  for (const auto& d : in.documents) stage.input_bytes("document", d.source_path, d.text);
  stage.input_bytes("labels", cfg.paths.labels, in.labels_text);
  stage.input_bytes("stopwords", cfg.paths.stopwords.empty() ? "bundled:stopwords_en_v1"
                                                             : cfg.paths.stopwords,
                    in.stopwords_text);
}

corpus::Corpus load_cached_corpus(const Context& ctx, Stage& stage) {
  const CorpusInputs in = read_corpus_inputs(ctx.cfg);
  const fs::path cache = fs::path(ctx.cfg.paths.out) / in.cache_relative;
  if (!fs::exists(cache)) {
    throw InputError("corpus cache " + cache.string() +
                     " not found for these inputs; run `planlens ingest` first");
  }
  stage.input("corpus_cache", cache.string());
  return corpus::corpus_from_json(json::parse(read_file(cache.string())));
}

struct Features {
  featurizer::Vocabulary vocab;
  featurizer::SparseMatrix tfidf;
};

Features featurize(const config::RunConfig& cfg, const corpus::Corpus& c) {
  Features f;
  f.vocab = featurizer::build_vocabulary(c, cfg.featurizer.min_df);
  f.tfidf = featurizer::tfidf_transform(featurizer::count_matrix(c, f.vocab), f.vocab,
                                        cfg.featurizer.tfidf_mode,
                                        cfg.featurizer.frequency_basis);
  return f;
}

const topics::Lexicon& lexicon_for(const config::RunConfig& cfg, Stage& stage,
                                   std::optional<topics::Lexicon>& storage, std::ostream& log) {
  if (cfg.paths.lexicon.empty()) {
    stage.input_bytes("lexicon", "bundled:lexicon_en_v1", resources::lexicon_en());
    return topics::default_lexicon();
  }
  require_file(cfg.paths.lexicon, "lexicon");
  stage.input("lexicon", cfg.paths.lexicon);
  storage = topics::load_lexicon(cfg.paths.lexicon);
  for (const auto& w : storage->warnings) log << "warning: " << w << "\n";
  return *storage;
}

std::string topic_vectors_relative(const config::RunConfig& cfg) {
  return cfg.topics.normalize ? "topics/normalized_topic_vectors.csv" : "topics/topic_vectors.csv";
}

std::vector<std::string> topic_keys() {
  const auto& keys = topics::topic_keys();
  return {keys.begin(), keys.end()};
}

void cmd_ingest(const Context& ctx) {
  Stage stage(ctx, "ingest");
  const CorpusInputs in = read_corpus_inputs(ctx.cfg);
  record_corpus_inputs(stage, ctx.cfg, in);
  const auto labels = corpus::parse_labels(in.labels_text, ctx.cfg.paths.labels);
  const corpus::Corpus c = corpus::build_corpus(in.documents, labels, preprocess_options(ctx.cfg));
  stage.output(in.cache_relative, corpus::to_json(c).dump() + "\n");
  stage.output("ingest/exclusions.json", corpus::exclusion_report(c).dump(2) + "\n");
  stage.flag("cities", c.size());
  stage.flag("excluded", c.excluded.size());
  stage.flag("corpus_digest", in.digest);
  stage.finish();
}

void cmd_predict(const Context& ctx) {
  Stage stage(ctx, "predict");
  const corpus::Corpus c = load_cached_corpus(ctx, stage);
  const Features f = featurize(ctx.cfg, c);
  const auto y = c.labels();
  const glm::FitConfig fit = ctx.cfg.fit_config();
  const eval::EvaluationReport report =
      eval::evaluate_repeated(f.tfidf, y, f.vocab.terms, fit, ctx.cfg.eval_options());
  if (report.nonconverged_fits > 0) {
    *ctx.log << "warning: " << report.nonconverged_fits
             << " split fit(s) stopped at max_iters before converging\n";
  }
  stage.output("predict/vocabulary.csv", featurizer::vocabulary_csv(f.vocab));
  stage.output("predict/report.json", eval::to_json(report, fit).dump(2) + "\n");
  stage.output("predict/predictive_terms.csv", eval::predictive_terms_csv(report));
  stage.flag("nonconverged_fits", report.nonconverged_fits);
  stage.finish();
}

void cmd_topics(const Context& ctx) {
  Stage stage(ctx, "topics");
  const corpus::Corpus c = load_cached_corpus(ctx, stage);
  std::optional<topics::Lexicon> storage;
  const topics::Lexicon& lexicon = lexicon_for(ctx.cfg, stage, storage, *ctx.log);

  std::vector<topics::TopicVector> vectors;
  std::vector<std::size_t> term_counts;
  for (const auto& id : c.city_ids()) {
    vectors.push_back(topics::topic_counts(c.terms(id), lexicon, ctx.cfg.topics.count_mode, id));
    term_counts.push_back(corpus::unigram_count(c.terms(id)));
  }
  const Features f = featurize(ctx.cfg, c);
  json clouds = json::array();
  for (const auto& id : c.city_ids()) {
    const auto entries =
        topics::wordcloud_data(id, f.tfidf, f.vocab, lexicon, ctx.cfg.topics.wordcloud_terms);
    clouds.push_back(topics::wordcloud_json(id, entries));
  }

  Eigen::MatrixXd data(static_cast<Eigen::Index>(vectors.size()),
                       static_cast<Eigen::Index>(topics::kTopicCount));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t t = 0; t < topics::kTopicCount; ++t) {
      double v = static_cast<double>(vectors[i].counts[t]);
      if (ctx.cfg.topics.normalize) {
        v = term_counts[i] ? v / static_cast<double>(term_counts[i]) : 0.0;
      }
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = v;
    }
  }
  const auto corr = factors::topic_correlations(data, topic_keys());
  if (corr.degenerate()) {
    *ctx.log << "warning: topics with no variation across cities:";
    for (const auto& z : corr.zero_variance) *ctx.log << " " << z;
    *ctx.log << "\n";
  }

  stage.output("topics/lexicon.csv", topics::lexicon_csv(lexicon));
  stage.output("topics/topic_vectors.csv", topics::topic_vectors_csv(vectors));
  stage.output("topics/normalized_topic_vectors.csv",
               topics::normalized_topic_vectors_csv(vectors, term_counts));
  stage.output("topics/median_counts.csv",
               topics::median_csv(topics::median_topic_counts(vectors)));
  stage.output("topics/correlations.csv", factors::correlation_csv(corr));
  stage.output("topics/wordclouds.json", clouds.dump(2) + "\n");
  stage.flag("zero_variance_topics", corr.zero_variance);
  stage.flag("lexicon_terms", lexicon.size());
  stage.finish();
}

struct TopicTable {
  std::vector<std::string> city_ids;
  Eigen::MatrixXd data;
};

TopicTable read_topic_table(const std::string& path) {
  const auto table = csv::parse(read_file(path));
  const auto keys = topic_keys();
  std::vector<int> cols;
  if (table.column("city_id") != 0) throw InputError(path + ": first column must be city_id");
  for (const auto& k : keys) {
    const int col = table.column(k);
    if (col < 0) throw InputError(path + ": missing column " + k);
    cols.push_back(col);
  }
  TopicTable out;
  out.data.resize(static_cast<Eigen::Index>(table.rows.size()),
                  static_cast<Eigen::Index>(keys.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw InputError(path + ":" + std::to_string(table.lines[r]) + ": wrong number of fields");
    }
    out.city_ids.push_back(row[0]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& cell = row[static_cast<std::size_t>(cols[k])];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0' || !std::isfinite(v)) {
        throw InputError(path + ":" + std::to_string(table.lines[r]) + ": bad value '" + cell +
                         "'");
      }
      out.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

void cmd_factors(const Context& ctx) {
  Stage stage(ctx, "factors");
  const fs::path vectors_path = fs::path(ctx.cfg.paths.out) / topic_vectors_relative(ctx.cfg);
  if (!fs::exists(vectors_path)) {
    throw InputError("topic vectors " + vectors_path.string() +
                     " not found; run `planlens topics` first");
  }
  stage.input("topic_vectors", vectors_path.string());
  const TopicTable table = read_topic_table(vectors_path.string());
  const corpus::Corpus c = load_cached_corpus(ctx, stage);

  const auto corr = factors::topic_correlations(table.data, topic_keys());
  const auto model = factors::fit_factor_model(corr, ctx.cfg.factor_options());
  const auto scores = factors::factor_scores(model, table.data, table.city_ids);
  if (model.no_factor_structure) *ctx.log << "warning: topics share no common variance\n";
  if (!model.converged) *ctx.log << "warning: factor extraction stopped before converging\n";
  if (!model.heywood.empty()) *ctx.log << "warning: communality above 1 was clamped\n";

  stage.output("factors/loadings.csv", factors::loadings_csv(model));
  stage.output("factors/scores.csv", factors::scores_csv(scores.scores));
  stage.output("factors/summary_stats.csv",
               factors::summary_csv(factors::summary_stats(c.records)));
  stage.output("factors/factors.json", factors::to_json(model, scores, corr).dump(2) + "\n");
  if (ctx.svg) stage.output("factors/scores.svg", factors::scores_svg(scores.scores));
  stage.flag("zero_variance_topics", corr.zero_variance);
  stage.flag("no_factor_structure", model.no_factor_structure);
  stage.flag("heywood", model.heywood);
  stage.finish();
}

void cmd_expand(const Context& ctx) {
  Stage stage(ctx, "expand");
  require_file(ctx.cfg.paths.embeddings, "embeddings file");
  stage.input("embeddings", ctx.cfg.paths.embeddings);
  std::optional<topics::Lexicon> storage;
  const topics::Lexicon& lexicon = lexicon_for(ctx.cfg, stage, storage, *ctx.log);
  const auto emb = topics::load_word_vectors(ctx.cfg.paths.embeddings);
  for (const auto& w : emb.warnings) *ctx.log << "warning: " << w << "\n";

  std::vector<std::size_t> wanted;
  if (ctx.expand_topic) {
    const auto t = topics::topic_index(*ctx.expand_topic);
    if (!t) throw InputError("unknown topic: " + *ctx.expand_topic);
    wanted.push_back(*t);
  } else {
    for (std::size_t t = 0; t < topics::kTopicCount; ++t) wanted.push_back(t);
  }
  std::string out = "topic,term,score,nearest_seed\n";
  json missing = json::object();
  for (std::size_t t : wanted) {
    const std::vector<std::string> seeds(lexicon.terms[t].begin(), lexicon.terms[t].end());
    const std::string& name = topics::topic_names()[t];
    topics::Expansion e;
    try {
      e = topics::expand_seeds(seeds, emb, ctx.cfg.topics.expand_k,
                               ctx.cfg.topics.expand_min_similarity);
    } catch (const InputError&) {
      if (ctx.expand_topic) throw;
      *ctx.log << "warning: no seed of topic " << name << " is in the embedding vocabulary\n";
      missing[name] = seeds;
      continue;
    }
    out += topics::candidates_csv(name, e.candidates, false);
    missing[name] = e.missing_seeds;
  }
  stage.output("expand/candidates.csv", out);
  stage.output("expand/missing_seeds.json", missing.dump(2) + "\n");
  stage.finish();
}

void cmd_report(const Context& ctx) {
  cmd_ingest(ctx);
  cmd_predict(ctx);
  cmd_topics(ctx);
  cmd_factors(ctx);

  Stage stage(ctx, "report");
  const fs::path out(ctx.cfg.paths.out);
  for (const char* part : {"predict/report.json", "predict/predictive_terms.csv",
                           "topics/median_counts.csv", "factors/factors.json"}) {
    stage.input(part, (out / part).string());
  }
  const json predict = json::parse(read_file((out / "predict/report.json").string()));
  const json factor = json::parse(read_file((out / "factors/factors.json").string()));
  json top = json::array();
  const auto terms = csv::parse(read_file((out / "predict/predictive_terms.csv").string()));
  for (std::size_t r = 0; r < terms.rows.size() && r < 10; ++r) {
    top.push_back({{"term", terms.rows[r][0]},
                   {"avg_coefficient", std::stod(terms.rows[r][1])},
                   {"p_value", std::stod(terms.rows[r][2])}});
  }
  json medians = json::object();
  const auto median_table = csv::parse(read_file((out / "topics/median_counts.csv").string()));
  for (const auto& row : median_table.rows) medians[row[0]] = std::stod(row[1]);
  const json report = {
      {"classification",
       {{"mean_f1", predict["mean_f1"]},
        {"mean_precision", predict["mean_precision"]},
        {"mean_recall", predict["mean_recall"]},
        {"selected_lambda", predict["selected_lambda"]},
        {"nonconverged_fits", predict["nonconverged_fits"]},
        {"top_terms", top}}},
      {"topics", {{"median_counts", medians}}},
      {"factors",
       {{"quadrant_counts", factor["quadrant_counts"]},
        {"loadings", factor["loadings"]},
        {"no_factor_structure", factor["no_factor_structure"]}}},
  };
  stage.output("report/report.json", report.dump(2) + "\n");
  stage.finish();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"planlens: text analysis of city climate plans"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
  bool svg = false;
  std::string topic;
  app.add_option("--config", config_path, "Configuration file (else $PLANLENS_CONFIG)");
  app.add_option("--seed", seed, "Overrides [run] seed");
  app.add_option("--threads", threads, "Worker threads; never changes outputs")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Overrides [paths] out");

  auto* ingest = app.add_subcommand("ingest", "Read documents and labels into the corpus cache");
  auto* predict = app.add_subcommand("predict", "Repeated-split evaluation and predictive terms");
  auto* topic_cmd = app.add_subcommand("topics", "Topic vectors, medians, correlations, word clouds");
  auto* factor_cmd = app.add_subcommand("factors", "Two-factor model, scores and summary table");
  auto* report = app.add_subcommand("report", "Run every stage and bundle the results");
  auto* expand = app.add_subcommand("expand-lexicon", "Nearest embedding neighbors of the seeds");
  factor_cmd->add_flag("--svg", svg, "Also write a scatter plot of the scores");
  report->add_flag("--svg", svg, "Also write a scatter plot of the scores");
  expand->add_option("--topic", topic, "Only this topic (name or key)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv("PLANLENS_CONFIG")) config_path = env;
    }
    if (config_path.empty()) {
      throw InputError("no configuration: pass --config or set PLANLENS_CONFIG");
    }
    Context ctx;
    ctx.cfg = config::load_config(config_path);
    if (seed) ctx.cfg.seed = *seed;
    if (threads) ctx.cfg.threads = *threads;
    if (!out_dir.empty()) ctx.cfg.paths.out = fs::absolute(out_dir).lexically_normal().string();
    config::validate(ctx.cfg);
    ctx.svg = svg;
    if (!topic.empty()) ctx.expand_topic = topic;
    ctx.log = &err;

    if (ingest->parsed()) cmd_ingest(ctx);
    if (predict->parsed()) cmd_predict(ctx);
    if (topic_cmd->parsed()) cmd_topics(ctx);
    if (factor_cmd->parsed()) cmd_factors(ctx);
    if (report->parsed()) cmd_report(ctx);
    if (expand->parsed()) cmd_expand(ctx);
    return kOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: unreadable cache or report: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace planlens::cli
