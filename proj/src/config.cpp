#include "planlens/config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "planlens/common.hpp"

namespace planlens::config {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_integer(const std::string& s, const std::string& where) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError(where + ": expected an integer, got '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError(where + ": expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw InputError(where + ": expected true or false, got '" + s + "'");
}

template <typename F>
auto parse_choice(F parse, const std::string& s, const std::string& where) {
  try {
    return parse(s);
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

// Section -> key -> accessors, in file order.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
  using Fields = std::vector<std::pair<std::string, Field>>;
  auto path = [](std::string Paths::*m) {
    return Field{[m](RunConfig& c, const std::string& v, const std::string&) { c.paths.*m = v; },
                 [m](const RunConfig& c) { return c.paths.*m; }};
  };
  auto boolean = [](auto get_ref) {
    return Field{[get_ref](RunConfig& c, const std::string& v, const std::string& w) {
                   get_ref(c) = parse_bool(v, w);
                 },
                 [get_ref](const RunConfig& c) {
                   return std::string(get_ref(c) ? "true" : "false");
                 }};
  };
  auto real = [](auto get_ref) {
    return Field{[get_ref](RunConfig& c, const std::string& v, const std::string& w) {
                   get_ref(c) = parse_real(v, w);
                 },
                 [get_ref](const RunConfig& c) { return shortest(get_ref(c)); }};
  };
  auto integer = [](auto get_ref) {
    return Field{[get_ref](RunConfig& c, const std::string& v, const std::string& w) {
                   auto& ref = get_ref(c);
                   ref = parse_integer<std::remove_reference_t<decltype(ref)>>(v, w);
                 },
                 [get_ref](const RunConfig& c) {
                   return std::to_string(get_ref(c));
                 }};
  };
  auto choice = [](auto get_ref, auto parse) {
    return Field{[get_ref, parse](RunConfig& c, const std::string& v, const std::string& w) {
                   get_ref(c) = parse_choice(parse, v, w);
                 },
                 [get_ref](const RunConfig& c) {
                   using planlens::eval::to_string;
                   using planlens::factors::to_string;
                   using planlens::featurizer::to_string;
                   using planlens::glm::to_string;
                   using planlens::topics::to_string;
                   return to_string(get_ref(c));
                 }};
  };

  static const std::vector<std::pair<std::string, Fields>> table = {
      {"paths",
       {{"docs", path(&Paths::docs)},
        {"labels", path(&Paths::labels)},
        {"lexicon", path(&Paths::lexicon)},
        {"stopwords", path(&Paths::stopwords)},
        {"embeddings", path(&Paths::embeddings)},
        {"out", path(&Paths::out)}}},
      {"corpus",
       {{"min_chars", integer([](auto& c) -> auto& { return c.corpus.min_chars; })},
        {"bigrams", boolean([](auto& c) -> auto& { return c.corpus.bigrams; })},
        {"remove_proper_nouns",
         boolean([](auto& c) -> auto& { return c.corpus.remove_proper_nouns; })},
        {"proper_noun_threshold",
         real([](auto& c) -> auto& { return c.corpus.proper_noun_threshold; })}}},
      {"featurizer",
       {{"min_df", real([](auto& c) -> auto& { return c.featurizer.min_df; })},
        {"tfidf_mode", choice([](auto& c) -> auto& { return c.featurizer.tfidf_mode; },
                              featurizer::parse_tfidf_mode)},
        {"frequency_basis",
         choice([](auto& c) -> auto& { return c.featurizer.frequency_basis; },
                featurizer::parse_frequency_basis)}}},
      {"glm",
       {{"weight_mode", choice([](auto& c) -> auto& { return c.glm.weight_mode; },
                               glm::parse_weight_mode)},
        {"max_iters", integer([](auto& c) -> auto& { return c.glm.max_iters; })},
        {"tol", real([](auto& c) -> auto& { return c.glm.tol; })},
        {"penalize_intercept",
         boolean([](auto& c) -> auto& { return c.glm.penalize_intercept; })},
        {"standardize", boolean([](auto& c) -> auto& { return c.glm.standardize; })},
        {"lambda_grid_points", integer([](auto& c) -> auto& { return c.glm.grid_points; })},
        {"lambda_grid_ratio", real([](auto& c) -> auto& { return c.glm.grid_ratio; })}}},
      {"eval",
       {{"n_splits", integer([](auto& c) -> auto& { return c.eval.n_splits; })},
        {"test_fraction", real([](auto& c) -> auto& { return c.eval.test_fraction; })},
        {"loocv_scoring", choice([](auto& c) -> auto& { return c.eval.scoring; },
                                 eval::parse_loocv_scoring)},
        {"chi_square_yates", boolean([](auto& c) -> auto& { return c.eval.yates; })}}},
      {"topics",
       {{"count_mode", choice([](auto& c) -> auto& { return c.topics.count_mode; },
                              topics::parse_count_mode)},
        {"normalize", boolean([](auto& c) -> auto& { return c.topics.normalize; })},
        {"wordcloud_terms",
         integer([](auto& c) -> auto& { return c.topics.wordcloud_terms; })},
        {"expand_k", integer([](auto& c) -> auto& { return c.topics.expand_k; })},
        {"expand_min_similarity",
         real([](auto& c) -> auto& { return c.topics.expand_min_similarity; })}}},
      {"factors",
       {{"extraction", choice([](auto& c) -> auto& { return c.factors.extraction; },
                              factors::parse_extraction)},
        {"rotation", choice([](auto& c) -> auto& { return c.factors.rotation; },
                            factors::parse_rotation)},
        {"max_iters", integer([](auto& c) -> auto& { return c.factors.max_iters; })},
        {"tol", real([](auto& c) -> auto& { return c.factors.tol; })}}},
      {"run",
       {{"seed", integer([](auto& c) -> auto& { return c.seed; })},
        {"threads", integer([](auto& c) -> auto& { return c.threads; })}}},
  };
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields) {
      if (k == key) return &f;
    }
  }
  return nullptr;
}

}  // namespace

glm::FitConfig RunConfig::fit_config() const {
  glm::FitConfig c;
  c.weight_mode = glm.weight_mode;
  c.max_iters = glm.max_iters;
  c.tol = glm.tol;
  c.penalize_intercept = glm.penalize_intercept;
  c.standardize = glm.standardize;
  return c;
}

eval::EvalOptions RunConfig::eval_options() const {
  eval::EvalOptions o;
  o.plan.seed = seed;
  o.plan.n_splits = eval.n_splits;
  o.plan.test_fraction = eval.test_fraction;
  o.grid_points = glm.grid_points;
  o.grid_ratio = glm.grid_ratio;
  o.scoring = eval.scoring;
  o.yates = eval.yates;
  o.threads = threads;
  return o;
}

factors::FactorOptions RunConfig::factor_options() const {
  factors::FactorOptions o;
  o.extraction = factors.extraction;
  o.rotation = factors.rotation;
  o.max_iters = factors.max_iters;
  o.tol = factors.tol;
  return o;
}

RunConfig parse_config(std::string_view text, const std::string& base_dir,
                       const std::string& source) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw InputError(source + ": key '" + section + "' is outside any section");
    }
    bool known = false;
    for (const auto& entry : schema()) known |= entry.first == section;
    if (!known) throw InputError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const Field* field = find_field(section, key);
      if (!field) throw InputError(source + ": unknown key '" + key + "' in [" + section + "]");
      field->set(config, value.data(), source + ": [" + section + "] " + key);
    }
  }
  for (std::string* p : {&config.paths.docs, &config.paths.labels, &config.paths.lexicon,
                         &config.paths.stopwords, &config.paths.embeddings, &config.paths.out}) {
    *p = resolve(*p, base_dir);
  }
  validate(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw InputError("config file not found: " + path);
  const std::string base = fs::absolute(path).parent_path().string();
  return parse_config(read_file(path), base, path);
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  for (const auto& [section, fields] : schema()) {
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(config) + "\n";
  }
  return out;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("invalid configuration: " + what);
  };
  require(c.paths.out.size() > 0, "[paths] out is empty");
  require(c.corpus.proper_noun_threshold >= 0.0 && c.corpus.proper_noun_threshold <= 1.0,
          "[corpus] proper_noun_threshold must be in [0, 1]");
  require(c.featurizer.min_df > 0.0 && c.featurizer.min_df <= 1.0,
          "[featurizer] min_df must be in (0, 1]");
  require(c.glm.grid_points >= 1, "[glm] lambda_grid_points must be at least 1");
  require(c.glm.grid_ratio > 0.0 && c.glm.grid_ratio < 1.0,
          "[glm] lambda_grid_ratio must be in (0, 1)");
  require(c.topics.wordcloud_terms >= 1, "[topics] wordcloud_terms must be at least 1");
  require(c.topics.expand_k >= 1, "[topics] expand_k must be at least 1");
  require(c.topics.expand_min_similarity >= -1.0 && c.topics.expand_min_similarity <= 1.0,
          "[topics] expand_min_similarity must be in [-1, 1]");
  require(c.factors.max_iters >= 1, "[factors] max_iters must be at least 1");
  require(c.factors.tol > 0.0, "[factors] tol must be positive");
  require(c.threads >= 1, "[run] threads must be at least 1");
  try {
    c.fit_config().validate();
    c.eval_options().plan.validate();
  } catch (const InputError& e) {
    throw InputError(std::string("invalid configuration: ") + e.what());
  }
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, fields] : schema()) {
    for (const auto& [key, field] : fields) {
      if (section == "run" && key == "threads") continue;
      j[section][key] = field.get(config);
    }
  }
  return j;
}

}  // namespace planlens::config
