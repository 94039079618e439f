#include "dialret/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "dialret/error.h"

namespace dialret {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string text(v);
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used == text.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error("config key '" + std::string(key) + "': not a number: '" + text + "'");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T x{};
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || end != v.data() + v.size())
    throw Error("config key '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
  return x;
}

// Shortest representation that round-trips.
std::string show(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct Field {
  std::function<void(Config&, std::string_view key, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

#define DIALRET_STRING(expr)                                                   \
  Field {                                                                      \
    [](Config& c, std::string_view, std::string_view v) { c.expr = std::string(v); }, \
        [](const Config& c) { return c.expr; }                                 \
  }
#define DIALRET_REAL(expr)                                                                 \
  Field {                                                                                  \
    [](Config& c, std::string_view k, std::string_view v) { c.expr = parse_double(k, v); }, \
        [](const Config& c) { return show(c.expr); }                                       \
  }
#define DIALRET_COUNT(expr)                                                               \
  Field {                                                                                 \
    [](Config& c, std::string_view k, std::string_view v) {                               \
      c.expr = parse_integer<std::decay_t<decltype(c.expr)>>(k, v);                       \
    },                                                                                    \
        [](const Config& c) { return std::to_string(c.expr); }                            \
  }

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> kFields = {
      {"corpus", DIALRET_STRING(corpus)},
      {"index", DIALRET_STRING(index)},
      {"threads", DIALRET_STRING(threads)},
      {"stopwords", DIALRET_STRING(stopwords)},
      {"blocklist", DIALRET_STRING(blocklist)},
      {"stemmer",
       {[](Config& c, std::string_view, std::string_view v) { c.stemmer = stemmer_from_string(v); },
        [](const Config& c) { return std::string(to_string(c.stemmer)); }}},
      {"beta", DIALRET_REAL(ranker.beta)},
      {"gamma", DIALRET_REAL(ranker.gamma)},
      {"mu", DIALRET_REAL(ranker.mu)},
      {"delta", DIALRET_REAL(ranker.delta)},
      {"k_docs", DIALRET_COUNT(ranker.k_docs)},
      {"k_sents", DIALRET_COUNT(ranker.k_sents)},
      {"weak.k_sents", DIALRET_COUNT(weak_k_sents)},
      {"bm25.k1", DIALRET_REAL(bm25.k1)},
      {"bm25.b", DIALRET_REAL(bm25.b)},
      {"rrf.nu", DIALRET_REAL(rrf_nu)},
      {"weak.lambda", DIALRET_REAL(fused.lambda)},
      {"weak.nu", DIALRET_REAL(fused.nu)},
      {"weak.delta", DIALRET_REAL(fused.delta)},
      {"weak.m_future", DIALRET_COUNT(fused.m_future)},
      {"weak.mu", DIALRET_REAL(annotator_mu)},
      {"weak.label_k", DIALRET_COUNT(label_k)},
      {"weak.idf",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "sentence")
            c.idf_granularity = FrequencyGranularity::sentence;
          else if (v == "document")
            c.idf_granularity = FrequencyGranularity::document;
          else
            throw Error("config key '" + std::string(k) + "': expected sentence or document");
        },
        [](const Config& c) {
          return std::string(c.idf_granularity == FrequencyGranularity::sentence ? "sentence"
                                                                                 : "document");
        }}},
      {"weak.min_target_words", DIALRET_COUNT(selection.min_target_words)},
      {"filter.min_tokens", DIALRET_COUNT(filters.min_tokens)},
      {"filter.max_tokens", DIALRET_COUNT(filters.max_tokens)},
      {"eval.splits", DIALRET_COUNT(n_splits)},
      {"eval.permutations", DIALRET_COUNT(permutations)},
      {"eval.alpha", DIALRET_REAL(alpha)},
      {"seed", DIALRET_COUNT(seed)},
      {"scorer", DIALRET_STRING(scorer)},
      {"embedder", DIALRET_STRING(embedder)},
      {"embed.dimension", DIALRET_COUNT(embed_dimension)},
      {"scorer.timeout_ms", DIALRET_COUNT(scorer_timeout_ms)},
      {"scorer.max_query_tokens", DIALRET_COUNT(budget.max_query_tokens)},
      {"scorer.max_text_tokens", DIALRET_COUNT(budget.max_text_tokens)},
  };
  return kFields;
}

#undef DIALRET_STRING
#undef DIALRET_REAL
#undef DIALRET_COUNT

const Field& field(std::string_view key) {
  auto it = fields().find(key);
  if (it == fields().end()) throw Error("unknown config key: '" + std::string(key) + "'");
  return it->second;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error("invalid config: " + message);
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  field(key).set(*this, key, trim(value));
}

std::string Config::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return kKeys;
}

void Config::validate() const {
  ranker.validate();
  bm25.validate();
  fused.validate();
  require(weak_k_sents > 0, "weak.k_sents must be positive");
  require(rrf_nu > 0.0, "rrf.nu must be positive");
  require(annotator_mu >= 0.0, "weak.mu must be non-negative");
  require(label_k > 0, "weak.label_k must be positive");
  require(filters.min_tokens <= filters.max_tokens, "filter.min_tokens exceeds filter.max_tokens");
  require(n_splits > 0, "eval.splits must be positive");
  require(permutations > 0, "eval.permutations must be positive");
  require(alpha > 0.0 && alpha < 1.0, "eval.alpha must lie in (0,1)");
  require(embed_dimension > 0, "embed.dimension must be positive");
  require(scorer_timeout_ms > 0, "scorer.timeout_ms must be positive");
  require(budget.max_query_tokens > 0 && budget.max_text_tokens > 0,
          "scorer token budgets must be positive");
  require(!scorer.empty(), "scorer must not be empty");
  require(!embedder.empty(), "embedder must not be empty");
}

AnalyzerConfig Config::analyzer() const {
  AnalyzerConfig a;
  a.stemmer = stemmer;
  if (!stopwords.empty()) a.stopwords = load_stopwords(stopwords);
  return a;
}

WeakLabelConfig Config::weak_label() const {
  WeakLabelConfig w;
  w.ranker = ranker;
  w.ranker.k_sents = weak_k_sents;
  w.fused = fused;
  w.annotator_mu = annotator_mu;
  w.k = label_k;
  w.idf_granularity = idf_granularity;
  w.selection = selection;
  return w;
}

ExternalScorerHandle Config::handle(const std::string& command) const {
  ExternalScorerHandle h;
  h.command = split_command(command);
  h.timeout = std::chrono::milliseconds(scorer_timeout_ms);
  h.budget = budget;
  return h;
}

std::string Config::resolved() const {
  std::string out;
  for (const auto& key : keys()) out += key + "=" + get(key) + "\n";
  return out;
}

void apply_config(std::istream& in, Config& config, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw Error(where + ": expected key=value");
    try {
      config.set(trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
}

void apply_config_file(const std::string& path, Config& config) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  apply_config(in, config, path);
}

}  // namespace dialret
